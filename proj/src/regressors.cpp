#include "iqaboost/regressors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iqaboost/rng.hpp"
#include "json.hpp"

namespace iqaboost {

namespace {

void require_finite(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (!x.allFinite() || !y.allFinite()) {
        throw NumericError("training data contains non-finite values");
    }
}

nlohmann::ordered_json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::ordered_json& arr) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    return v;
}

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::ordered_json& rows) {
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
        }
    }
    return m;
}

}  // namespace

ColumnStandardization ColumnStandardization::fit(const Eigen::MatrixXd& x) {
    const double n = static_cast<double>(x.rows());
    ColumnStandardization s;
    s.mean = x.colwise().mean();
    s.std.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double var = (x.col(j).array() - s.mean(j)).square().sum() / n;
        s.std(j) = std::sqrt(var);
        if (s.std(j) == 0.0) {
            throw DegenerateInputError("feature column " + std::to_string(j) +
                                       " is constant; cannot standardize");
        }
    }
    return s;
}

Eigen::VectorXd ColumnStandardization::apply(const Eigen::VectorXd& raw) const {
    if (raw.size() != mean.size()) {
        throw ShapeError("input length " + std::to_string(raw.size()) + " does not match model dim " +
                         std::to_string(mean.size()));
    }
    return (raw - mean).cwiseQuotient(std);
}

Eigen::MatrixXd ColumnStandardization::apply(const Eigen::MatrixXd& raw) const {
    if (raw.cols() != mean.size()) {
        throw ShapeError("input width " + std::to_string(raw.cols()) + " does not match model dim " +
                         std::to_string(mean.size()));
    }
    return (raw.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
}

TargetScaling TargetScaling::fit(const Eigen::VectorXd& y) {
    TargetScaling t;
    t.mean = y.mean();
    const double var = (y.array() - t.mean).square().sum() / static_cast<double>(y.size());
    const double sd = std::sqrt(var);
    t.std = sd == 0.0 ? 1.0 : sd;
    return t;
}

Eigen::VectorXd TargetScaling::to_standard(const Eigen::VectorXd& y) const {
    return (y.array() - mean) / std;
}

// ---------------------------------------------------------------------------
// Neural network
// ---------------------------------------------------------------------------

namespace {

struct NNShape {
    int input_dim;
    int hidden_dim;
    Eigen::Index param_count() const {
        return static_cast<Eigen::Index>(hidden_dim) * input_dim + 2 * hidden_dim + 1;
    }
};

// Parameter packing: w1 row-major, then b1, then w2, then b2.
void unpack(const Eigen::VectorXd& theta, const NNShape& shape, Eigen::MatrixXd& w1,
            Eigen::VectorXd& b1, Eigen::VectorXd& w2, double& b2) {
    const int h = shape.hidden_dim;
    const int m = shape.input_dim;
    w1.resize(h, m);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < m; ++c) w1(r, c) = theta(static_cast<Eigen::Index>(r) * m + c);
    }
    const Eigen::Index base = static_cast<Eigen::Index>(h) * m;
    b1 = theta.segment(base, h);
    w2 = theta.segment(base + h, h);
    b2 = theta(base + 2 * h);
}

}  // namespace

NNModel train_nn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int hidden_dim,
                 std::uint64_t seed, const LMOptions& lm_opts) {
    const Eigen::Index n = x.rows();
    const Eigen::Index m = x.cols();
    if (y.size() != n) throw ShapeError("X rows and y length differ");
    if (hidden_dim < 1) throw DegenerateInputError("hidden_dim must be >= 1");
    if (n < m + 1) {
        throw DegenerateInputError("need at least " + std::to_string(m + 1) + " samples for " +
                                   std::to_string(m) + " features, got " + std::to_string(n));
    }
    require_finite(x, y);

    NNModel model;
    model.input_dim = static_cast<int>(m);
    model.hidden_dim = hidden_dim;
    model.input_standardization = ColumnStandardization::fit(x);
    model.target_scaling = TargetScaling::fit(y);

    const Eigen::MatrixXd xs = model.input_standardization.apply(x);
    const Eigen::VectorXd ys = model.target_scaling.to_standard(y);

    const NNShape shape{static_cast<int>(m), hidden_dim};
    Eigen::VectorXd theta0(shape.param_count());
    {
        SplitMix64 rng(seed);
        const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(m));
        const double output_bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
        Eigen::Index idx = 0;
        for (int r = 0; r < hidden_dim; ++r) {
            for (Eigen::Index c = 0; c < m; ++c) {
                theta0(idx++) = rng.next_double(-hidden_bound, hidden_bound);
            }
        }
        for (int r = 0; r < hidden_dim; ++r) theta0(idx++) = rng.next_double(-hidden_bound, hidden_bound);
        for (int r = 0; r < hidden_dim; ++r) theta0(idx++) = rng.next_double(-output_bound, output_bound);
        theta0(idx++) = rng.next_double(-output_bound, output_bound);
    }

    LeastSquaresProblem problem;
    problem.theta0 = theta0;
    problem.residual_fn = [&xs, &ys, shape](const Eigen::VectorXd& theta) {
        Eigen::MatrixXd w1;
        Eigen::VectorXd b1, w2;
        double b2;
        unpack(theta, shape, w1, b1, w2, b2);
        Eigen::MatrixXd act = (xs * w1.transpose()).rowwise() + b1.transpose();
        act = act.array().tanh();
        return Eigen::VectorXd((act * w2).array() + b2 - ys.array());
    };
    problem.jacobian_fn = [&xs, shape](const Eigen::VectorXd& theta) {
        Eigen::MatrixXd w1;
        Eigen::VectorXd b1, w2;
        double b2;
        unpack(theta, shape, w1, b1, w2, b2);
        const Eigen::Index nn = xs.rows();
        const int h = shape.hidden_dim;
        const Eigen::Index mm = xs.cols();
        Eigen::MatrixXd act = (xs * w1.transpose()).rowwise() + b1.transpose();
        const Eigen::MatrixXd t = act.array().tanh();
        // d tanh = 1 - tanh^2, scaled by the output weight of each unit.
        const Eigen::MatrixXd gate = (1.0 - t.array().square()).matrix() * w2.asDiagonal();

        Eigen::MatrixXd jac(nn, shape.param_count());
        for (int unit = 0; unit < h; ++unit) {
            jac.middleCols(static_cast<Eigen::Index>(unit) * mm, mm) =
                xs.array().colwise() * gate.col(unit).array();
        }
        const Eigen::Index base = static_cast<Eigen::Index>(h) * mm;
        jac.middleCols(base, h) = gate;
        jac.middleCols(base + h, h) = t;
        jac.col(base + 2 * h).setOnes();
        return jac;
    };

    const LMResult fit = lm_fit(problem, lm_opts);
    unpack(fit.theta, shape, model.w1, model.b1, model.w2, model.b2);
    return model;
}

double predict_nn(const NNModel& model, const Eigen::VectorXd& raw_input) {
    if (raw_input.size() != model.input_dim) {
        throw ShapeError("input length " + std::to_string(raw_input.size()) +
                         " does not match model input_dim " + std::to_string(model.input_dim));
    }
    if (!raw_input.allFinite()) throw NumericError("prediction input not finite");
    const Eigen::VectorXd xs = model.input_standardization.apply(raw_input);
    const Eigen::VectorXd hidden = ((model.w1 * xs + model.b1).array().tanh()).matrix();
    return model.target_scaling.from_standard(model.w2.dot(hidden) + model.b2);
}

// ---------------------------------------------------------------------------
// SMO for linear epsilon-SVR
// ---------------------------------------------------------------------------

namespace {

// Directional slopes of |beta|: d|b|/dt along b+t and along b-t, at t = 0+.
inline double l1_slope_up(double beta) { return beta >= 0.0 ? 1.0 : -1.0; }
inline double l1_slope_down(double beta) { return beta > 0.0 ? -1.0 : 1.0; }

// Exact dual-objective gain of the update beta_i += t, beta_j -= t.
double pair_gain(double t, double eta, double yi, double yj, double fi, double fj, double bi,
                 double bj, double eps) {
    return t * (yi - yj) - t * (fi - fj) - 0.5 * t * t * eta -
           eps * (std::abs(bi + t) - std::abs(bi)) - eps * (std::abs(bj - t) - std::abs(bj));
}

double kkt_violation(double beta, double r, double c, double eps) {
    const double atol = 1e-10 * std::max(1.0, c);
    if (std::abs(beta) <= atol) return std::max(0.0, std::abs(r) - eps);
    if (beta >= c - atol) return std::max(0.0, eps - r);
    if (beta <= -c + atol) return std::max(0.0, r + eps);
    if (beta > 0.0) return std::abs(r - eps);
    return std::abs(r + eps);
}

}  // namespace

SVRModel train_svr_detailed(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c,
                            double epsilon, const SvrOptions& opts, SvrTrainInfo* info) {
    const Eigen::Index n = x.rows();
    if (y.size() != n) throw ShapeError("X rows and y length differ");
    if (n < 2) throw DegenerateInputError("SVR needs at least 2 samples");
    if (c <= 0.0) throw DegenerateInputError("C must be positive");
    if (epsilon < 0.0) throw DegenerateInputError("epsilon must be non-negative");
    require_finite(x, y);

    SVRModel model;
    model.c = c;
    model.epsilon = epsilon;
    model.input_standardization = ColumnStandardization::fit(x);
    model.target_scaling = TargetScaling::fit(y);

    const Eigen::MatrixXd xs = model.input_standardization.apply(x);
    const Eigen::VectorXd ys = model.target_scaling.to_standard(y);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(xs.cols());
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);  // model output without bias
    const Eigen::VectorXd diag = xs.rowwise().squaredNorm();

    // Default budget: 10n passes, one pass being n pair updates.
    const long max_updates =
        opts.max_updates >= 0 ? opts.max_updates : 10 * static_cast<long>(n) * static_cast<long>(n);
    const double tau = opts.kkt_tolerance;

    // Coordinates within snap of a bound are treated as pinned there, so the
    // violation scan never anchors on a direction with no room to move.
    const double snap = 1e-12 * std::max(1.0, c);
    auto snap_bounds = [&](double v) {
        if (v > c - snap) return c;
        if (v < -c + snap) return -c;
        if (std::abs(v) < snap) return 0.0;
        return v;
    };

    // Exact line search for the update beta[i] += t, beta[j] -= t: the best
    // of the interval ends, the |.| kinks, and each sign-region optimum.
    auto best_pair_step = [&](Eigen::Index i, Eigen::Index j, double kij, double* t_out) {
        const double eta = diag(i) + diag(j) - 2.0 * kij;
        const double t_lo = std::max(-c - beta(i), beta(j) - c);
        const double t_hi = std::min(c - beta(i), beta(j) + c);
        if (t_hi <= t_lo) return 0.0;
        double candidates[8];
        int n_cand = 0;
        candidates[n_cand++] = t_lo;
        candidates[n_cand++] = t_hi;
        if (-beta(i) > t_lo && -beta(i) < t_hi) candidates[n_cand++] = -beta(i);
        if (beta(j) > t_lo && beta(j) < t_hi) candidates[n_cand++] = beta(j);
        if (eta > 1e-300) {
            const double base = (ys(i) - ys(j)) - (f(i) - f(j));
            for (double si : {-1.0, 1.0}) {
                for (double sj : {-1.0, 1.0}) {
                    const double t = (base - epsilon * si + epsilon * sj) / eta;
                    if (t > t_lo && t < t_hi) candidates[n_cand++] = t;
                }
            }
        }
        double best_gain = 0.0;
        *t_out = 0.0;
        for (int ci = 0; ci < n_cand; ++ci) {
            const double t = candidates[ci];
            const double gain =
                pair_gain(t, eta, ys(i), ys(j), f(i), f(j), beta(i), beta(j), epsilon);
            if (gain > best_gain) {
                best_gain = gain;
                *t_out = t;
            }
        }
        return best_gain;
    };

    long updates = 0;
    double m_up = 0.0;
    double m_dn = 0.0;
    while (true) {
        // First-order violation scan in fixed index order.
        m_up = -std::numeric_limits<double>::infinity();
        m_dn = -std::numeric_limits<double>::infinity();
        Eigen::Index up_idx = -1;
        Eigen::Index dn_idx = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (beta(i) < c) {
                const double up = ys(i) - f(i) - epsilon * l1_slope_up(beta(i));
                if (up > m_up) {
                    m_up = up;
                    up_idx = i;
                }
            }
            if (beta(i) > -c) {
                const double dn = f(i) - ys(i) - epsilon * l1_slope_down(beta(i));
                if (dn > m_dn) {
                    m_dn = dn;
                    dn_idx = i;
                }
            }
        }
        if (m_up + m_dn <= tau) break;
        if (updates >= max_updates) {
            double worst = 0.0;
            const double b_try = (m_up - m_dn) / 2.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                worst = std::max(worst, kkt_violation(beta(i), ys(i) - f(i) - b_try, c, epsilon));
            }
            throw ConvergenceError("SMO did not converge after " + std::to_string(updates) +
                                   " pair updates; worst KKT violation " + std::to_string(worst));
        }

        // Anchor on the larger one-sided violation and pick the partner with
        // the largest exact dual gain; fall back to the other anchor if the
        // first cannot move.
        double best_gain = 0.0;
        double best_t = 0.0;
        Eigen::Index best_i = -1;
        Eigen::Index best_j = -1;
        for (int attempt = 0; attempt < 2 && best_gain <= 0.0; ++attempt) {
            const bool anchor_up = (m_up >= m_dn) == (attempt == 0);
            const Eigen::Index a = anchor_up ? up_idx : dn_idx;
            if (a < 0) continue;
            const Eigen::VectorXd k_a = xs * xs.row(a).transpose();
            for (Eigen::Index p = 0; p < n; ++p) {
                if (p == a) continue;
                const Eigen::Index i = anchor_up ? a : p;  // moves up
                const Eigen::Index j = anchor_up ? p : a;  // moves down
                double t = 0.0;
                const double gain = best_pair_step(i, j, k_a(p), &t);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_t = t;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        if (best_i < 0 || best_gain <= 0.0) {
            // No feasible pair can improve the dual below the threshold.
            double worst = 0.0;
            const double b_try = (m_up - m_dn) / 2.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                worst = std::max(worst, kkt_violation(beta(i), ys(i) - f(i) - b_try, c, epsilon));
            }
            throw ConvergenceError("SMO stalled; worst KKT violation " + std::to_string(worst));
        }

        beta(best_i) = snap_bounds(std::clamp(beta(best_i) + best_t, -c, c));
        beta(best_j) = snap_bounds(std::clamp(beta(best_j) - best_t, -c, c));
        w = xs.transpose() * beta;
        f = xs * w;
        ++updates;
    }

    model.w = w;
    model.b = (m_up - m_dn) / 2.0;

    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        worst = std::max(worst, kkt_violation(beta(i), ys(i) - f(i) - model.b, c, epsilon));
    }
    if (worst > tau) {
        throw ConvergenceError("post-training KKT audit failed; worst violation " +
                               std::to_string(worst));
    }
    if (info) {
        info->beta = beta;
        info->dual_objective = -0.5 * beta.dot(f) + ys.dot(beta) - epsilon * beta.lpNorm<1>();
        info->worst_kkt_violation = worst;
        info->updates = updates;
    }
    return model;
}

SVRModel train_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c, double epsilon,
                   const SvrOptions& opts) {
    return train_svr_detailed(x, y, c, epsilon, opts, nullptr);
}

double predict_svr(const SVRModel& model, const Eigen::VectorXd& raw_input) {
    if (raw_input.size() != model.w.size()) {
        throw ShapeError("input length " + std::to_string(raw_input.size()) +
                         " does not match model dim " + std::to_string(model.w.size()));
    }
    if (!raw_input.allFinite()) throw NumericError("prediction input not finite");
    const Eigen::VectorXd xs = model.input_standardization.apply(raw_input);
    return model.target_scaling.from_standard(model.w.dot(xs) + model.b);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string nn_model_to_json(const NNModel& model) {
    nlohmann::ordered_json j;
    j["format"] = "iqaboost-nn-model";
    j["version"] = 1;
    j["input_dim"] = model.input_dim;
    j["hidden_dim"] = model.hidden_dim;
    j["w1"] = matrix_to_json(model.w1);
    j["b1"] = vector_to_json(model.b1);
    j["w2"] = vector_to_json(model.w2);
    j["b2"] = model.b2;
    j["input_mean"] = vector_to_json(model.input_standardization.mean);
    j["input_std"] = vector_to_json(model.input_standardization.std);
    j["target_mean"] = model.target_scaling.mean;
    j["target_std"] = model.target_scaling.std;
    return j.dump(2) + "\n";
}

NNModel nn_model_from_json(const std::string& text) {
    const auto j = nlohmann::ordered_json::parse(text);
    if (j.value("format", "") != "iqaboost-nn-model" || j.value("version", 0) != 1) {
        throw ParseError("not a version-1 iqaboost-nn-model document");
    }
    NNModel m;
    m.input_dim = j.at("input_dim").get<int>();
    m.hidden_dim = j.at("hidden_dim").get<int>();
    m.w1 = matrix_from_json(j.at("w1"));
    m.b1 = vector_from_json(j.at("b1"));
    m.w2 = vector_from_json(j.at("w2"));
    m.b2 = j.at("b2").get<double>();
    m.input_standardization.mean = vector_from_json(j.at("input_mean"));
    m.input_standardization.std = vector_from_json(j.at("input_std"));
    m.target_scaling.mean = j.at("target_mean").get<double>();
    m.target_scaling.std = j.at("target_std").get<double>();
    return m;
}

std::string svr_model_to_json(const SVRModel& model) {
    nlohmann::ordered_json j;
    j["format"] = "iqaboost-svr-model";
    j["version"] = 1;
    j["w"] = vector_to_json(model.w);
    j["b"] = model.b;
    j["C"] = model.c;
    j["epsilon"] = model.epsilon;
    j["input_mean"] = vector_to_json(model.input_standardization.mean);
    j["input_std"] = vector_to_json(model.input_standardization.std);
    j["target_mean"] = model.target_scaling.mean;
    j["target_std"] = model.target_scaling.std;
    return j.dump(2) + "\n";
}

SVRModel svr_model_from_json(const std::string& text) {
    const auto j = nlohmann::ordered_json::parse(text);
    if (j.value("format", "") != "iqaboost-svr-model" || j.value("version", 0) != 1) {
        throw ParseError("not a version-1 iqaboost-svr-model document");
    }
    SVRModel m;
    m.w = vector_from_json(j.at("w"));
    m.b = j.at("b").get<double>();
    m.c = j.at("C").get<double>();
    m.epsilon = j.at("epsilon").get<double>();
    m.input_standardization.mean = vector_from_json(j.at("input_mean"));
    m.input_standardization.std = vector_from_json(j.at("input_std"));
    m.target_scaling.mean = j.at("target_mean").get<double>();
    m.target_scaling.std = j.at("target_std").get<double>();
    return m;
}

}  // namespace iqaboost
