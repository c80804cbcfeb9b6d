#include "iqaboost/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "iqaboost/optim.hpp"
#include "iqaboost/rng.hpp"

namespace iqaboost {

namespace {

double stable_sigmoid(double u) {
    // 1 / (1 + exp(u)) without overflow.
    if (u >= 0.0) {
        const double e = std::exp(-u);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(u));
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v, double mean) {
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = shared;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double apply_logistic_map(const LogisticFit& fit, double v0) {
    const auto& b = fit.beta;
    return b[0] * (0.5 - stable_sigmoid(b[1] * (v0 - b[2]))) + b[3] * v0 + b[4];
}

std::vector<double> apply_logistic_map(const LogisticFit& fit, const std::vector<double>& v0) {
    std::vector<double> out(v0.size());
    for (std::size_t i = 0; i < v0.size(); ++i) out[i] = apply_logistic_map(fit, v0[i]);
    return out;
}

LogisticFit fit_logistic_map(const std::vector<double>& objective,
                             const std::vector<double>& subjective) {
    if (objective.size() != subjective.size()) {
        throw ShapeError("objective and subjective lengths differ");
    }
    const std::size_t n = objective.size();
    if (n < 5) {
        throw DegenerateInputError("logistic fit needs at least 5 points, got " + std::to_string(n));
    }
    const double obj_mean = mean_of(objective);
    const double obj_std = population_std(objective, obj_mean);
    if (obj_std == 0.0) {
        throw DegenerateInputError("objective scores have zero spread");
    }

    const double y_mean = mean_of(subjective);
    const auto [obj_min_it, obj_max_it] = std::minmax_element(objective.begin(), objective.end());
    const auto [y_min_it, y_max_it] = std::minmax_element(subjective.begin(), subjective.end());
    std::vector<double> sorted_obj = objective;
    std::nth_element(sorted_obj.begin(), sorted_obj.begin() + static_cast<long>(n / 2),
                     sorted_obj.end());
    const double obj_median = sorted_obj[n / 2];

    double cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) cov += (objective[i] - obj_mean) * (subjective[i] - y_mean);
    cov /= static_cast<double>(n);
    const double slope = cov / (obj_std * obj_std);

    const Eigen::Map<const Eigen::VectorXd> v0(objective.data(), static_cast<Eigen::Index>(n));
    const Eigen::Map<const Eigen::VectorXd> y(subjective.data(), static_cast<Eigen::Index>(n));

    LeastSquaresProblem problem;
    problem.residual_fn = [&v0, &y](const Eigen::VectorXd& b) {
        Eigen::VectorXd r(v0.size());
        for (Eigen::Index i = 0; i < v0.size(); ++i) {
            const double g = stable_sigmoid(b(1) * (v0(i) - b(2)));
            r(i) = b(0) * (0.5 - g) + b(3) * v0(i) + b(4) - y(i);
        }
        return r;
    };
    problem.jacobian_fn = [&v0](const Eigen::VectorXd& b) {
        Eigen::MatrixXd j(v0.size(), 5);
        for (Eigen::Index i = 0; i < v0.size(); ++i) {
            const double g = stable_sigmoid(b(1) * (v0(i) - b(2)));
            const double gg = g * (1.0 - g);
            j(i, 0) = 0.5 - g;
            j(i, 1) = b(0) * gg * (v0(i) - b(2));
            j(i, 2) = -b(0) * b(1) * gg;
            j(i, 3) = v0(i);
            j(i, 4) = 1.0;
        }
        return j;
    };

    // Multi-start: b3 over {min, median, max}, b2 over both signs, plus an
    // identity-like start so the fitted map never loses to no mapping at all.
    const double y_range = *y_max_it - *y_min_it;
    std::vector<Eigen::VectorXd> starts;
    for (double b3 : {*obj_min_it, obj_median, *obj_max_it}) {
        for (double b2 : {1.0 / obj_std, -1.0 / obj_std}) {
            Eigen::VectorXd s(5);
            s << y_range, b2, b3, slope, y_mean;
            starts.push_back(s);
        }
    }
    {
        Eigen::VectorXd s(5);
        s << 0.0, 1.0 / obj_std, obj_median, 1.0, 0.0;
        starts.push_back(s);
    }

    double best_cost = std::numeric_limits<double>::infinity();
    LogisticFit best;
    for (const auto& start : starts) {
        problem.theta0 = start;
        const LMResult res = lm_fit(problem);
        if (res.final_cost < best_cost) {
            best_cost = res.final_cost;
            for (int i = 0; i < 5; ++i) best.beta[static_cast<std::size_t>(i)] = res.theta(i);
        }
    }
    return best;
}

double rmse(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeError("rmse inputs have different lengths");
    if (x.empty()) throw DegenerateInputError("rmse needs at least 1 sample");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(x.size()));
}

double plcc(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeError("plcc inputs have different lengths");
    if (x.size() < 3) throw DegenerateInputError("plcc needs at least 3 samples");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DegenerateInputError("plcc input has zero spread");
    }
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

double srcc(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeError("srcc inputs have different lengths");
    if (x.size() < 3) throw DegenerateInputError("srcc needs at least 3 samples");
    return plcc(average_ranks(x), average_ranks(y));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DegenerateInputError("normal quantile requires p in (0, 1)");
    }
    // Acklam's rational approximation followed by one Halley refinement
    // against the erfc-based CDF.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

SignificanceResult significance_diff(double r1, double r2, int n, double alpha) {
    if (n <= 3) throw DegenerateInputError("significance test needs n >= 4");
    if (std::abs(r1) >= 1.0 || std::abs(r2) >= 1.0) {
        throw DegenerateInputError("correlation magnitude must be below 1");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw DegenerateInputError("alpha must be in (0, 1)");
    const double z1 = std::atanh(r1);
    const double z2 = std::atanh(r2);
    const double se = std::sqrt(2.0 / (static_cast<double>(n) - 3.0));
    SignificanceResult result;
    result.statistic = (z1 - z2) / se;
    result.significant = std::abs(result.statistic) > normal_quantile(1.0 - alpha / 2.0);
    return result;
}

double significance_threshold(double r_base, int n, double alpha) {
    if (n <= 3) throw DegenerateInputError("significance test needs n >= 4");
    if (std::abs(r_base) >= 1.0) throw DegenerateInputError("correlation magnitude must be below 1");
    const double z_crit = normal_quantile(1.0 - alpha / 2.0);
    const double se = std::sqrt(2.0 / (static_cast<double>(n) - 3.0));
    auto excess = [&](double r) { return (std::atanh(r) - std::atanh(r_base)) / se - z_crit; };

    double lo = r_base;
    double hi = 1.0 - 1e-15;
    if (excess(hi) <= 0.0) return hi;  // threshold would exceed representable correlations
    while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        if (excess(mid) > 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::vector<std::size_t> FoldPlan::test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldPlan::train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] != fold) out.push_back(i);
    }
    return out;
}

FoldPlan make_fold_plan(std::size_t n, int k, int run_index, std::uint64_t master_seed) {
    if (k < 2) throw DegenerateInputError("k must be at least 2");
    if (n < static_cast<std::size_t>(k)) {
        throw DegenerateInputError("need at least k = " + std::to_string(k) + " stimuli, got " +
                                   std::to_string(n));
    }
    FoldPlan plan;
    plan.run_index = run_index;
    plan.k = k;
    plan.seed = hash64(master_seed, static_cast<std::uint64_t>(run_index));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    seeded_shuffle(order, plan.seed);

    plan.assignment.assign(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos) {
        plan.assignment[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    }
    return plan;
}

}  // namespace iqaboost
