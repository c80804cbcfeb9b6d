// Independent reference implementations used as test oracles. Everything here
// recomputes results from definitions, deliberately avoiding the library's
// computation paths.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "iqaboost/image.hpp"

namespace oracles {

inline double naive_mse(const iqaboost::GrayImage& a, const iqaboost::GrayImage& b) {
    double acc = 0.0;
    for (int r = 0; r < a.height(); ++r) {
        for (int c = 0; c < a.width(); ++c) {
            const double d = a.at(r, c) - b.at(r, c);
            acc += d * d;
        }
    }
    return acc / (static_cast<double>(a.width()) * a.height());
}

struct NaiveSsim {
    double full = 0.0;
    double cs = 0.0;
};

// Direct per-window evaluation with an explicit 2-D Gaussian mask.
inline NaiveSsim naive_ssim(const iqaboost::GrayImage& x, const iqaboost::GrayImage& y,
                            int window = 11, double sigma = 1.5, double k1 = 0.01,
                            double k2 = 0.03, double dynamic_range = 255.0) {
    std::vector<double> mask(static_cast<std::size_t>(window) * window);
    const double center = (window - 1) / 2.0;
    double mask_sum = 0.0;
    for (int r = 0; r < window; ++r) {
        for (int c = 0; c < window; ++c) {
            const double dr = r - center;
            const double dc = c - center;
            mask[static_cast<std::size_t>(r) * window + c] =
                std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
            mask_sum += mask[static_cast<std::size_t>(r) * window + c];
        }
    }
    for (double& v : mask) v /= mask_sum;

    const double c1 = (k1 * dynamic_range) * (k1 * dynamic_range);
    const double c2 = (k2 * dynamic_range) * (k2 * dynamic_range);

    double sum_full = 0.0;
    double sum_cs = 0.0;
    long count = 0;
    for (int r = 0; r + window <= x.height(); ++r) {
        for (int c = 0; c + window <= x.width(); ++c) {
            double mx = 0.0, my = 0.0;
            for (int i = 0; i < window; ++i) {
                for (int j = 0; j < window; ++j) {
                    const double w = mask[static_cast<std::size_t>(i) * window + j];
                    mx += w * x.at(r + i, c + j);
                    my += w * y.at(r + i, c + j);
                }
            }
            double vx = 0.0, vy = 0.0, cov = 0.0;
            for (int i = 0; i < window; ++i) {
                for (int j = 0; j < window; ++j) {
                    const double w = mask[static_cast<std::size_t>(i) * window + j];
                    const double dx = x.at(r + i, c + j) - mx;
                    const double dy = y.at(r + i, c + j) - my;
                    vx += w * dx * dx;
                    vy += w * dy * dy;
                    cov += w * dx * dy;
                }
            }
            const double lum = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            const double cs = (2.0 * cov + c2) / (vx + vy + c2);
            sum_full += lum * cs;
            sum_cs += cs;
            ++count;
        }
    }
    return {sum_full / count, sum_cs / count};
}

// Definition-level statistics on plain loops.
inline double naive_rmse(const std::vector<double>& x, const std::vector<double>& y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(acc / static_cast<double>(x.size()));
}

inline double naive_plcc(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double num = 0.0, dx2 = 0.0, dy2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - mx) * (y[i] - my);
        dx2 += (x[i] - mx) * (x[i] - mx);
        dy2 += (y[i] - my) * (y[i] - my);
    }
    return num / (std::sqrt(dx2) * std::sqrt(dy2));
}

// 1 - 6*sum(D^2)/(N(N^2-1)); valid for tie-free inputs only.
inline double spearman_closed_form(const std::vector<double>& x, const std::vector<double>& y) {
    auto rank_of = [](const std::vector<double>& v) {
        std::vector<std::size_t> order(v.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> ranks(v.size());
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            ranks[order[pos]] = static_cast<double>(pos + 1);
        }
        return ranks;
    };
    const auto rx = rank_of(x);
    const auto ry = rank_of(y);
    const double n = static_cast<double>(x.size());
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

// Plain least-squares solve for r = A*theta - b, independent of lm_fit.
inline Eigen::VectorXd normal_equations_solution(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    return a.colPivHouseholderQr().solve(b);
}

// Dual objective of linear epsilon-SVR for a given coefficient vector.
inline double svr_dual_objective(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                                 const Eigen::VectorXd& beta, double epsilon) {
    const Eigen::VectorXd f = xs * (xs.transpose() * beta);
    return -0.5 * beta.dot(f) + ys.dot(beta) - epsilon * beta.lpNorm<1>();
}

// Exhaustive grid search over discretized dual coefficients subject to
// sum(beta) = 0 and |beta_i| <= C; the last coefficient absorbs the balance.
// Refines once around the coarse optimum.
inline double svr_dual_grid_search(const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys, double c,
                                   double epsilon) {
    const int n = static_cast<int>(xs.rows());
    const int free_dims = n - 1;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd best_beta = beta;
    double best = svr_dual_objective(xs, ys, beta, epsilon);

    auto sweep = [&](const Eigen::VectorXd& center, double half_width, double step) {
        std::vector<int> counts(static_cast<std::size_t>(free_dims));
        const int points = static_cast<int>(std::round(2.0 * half_width / step)) + 1;
        std::fill(counts.begin(), counts.end(), 0);
        Eigen::VectorXd candidate = Eigen::VectorXd::Zero(n);
        while (true) {
            bool feasible = true;
            double sum = 0.0;
            for (int d = 0; d < free_dims; ++d) {
                const double v =
                    center(d) - half_width + step * counts[static_cast<std::size_t>(d)];
                if (std::abs(v) > c + 1e-12) {
                    feasible = false;
                }
                candidate(d) = v;
                sum += v;
            }
            candidate(free_dims) = -sum;
            if (std::abs(candidate(free_dims)) > c + 1e-12) feasible = false;
            if (feasible) {
                const double obj = svr_dual_objective(xs, ys, candidate, epsilon);
                if (obj > best) {
                    best = obj;
                    best_beta = candidate;
                }
            }
            int d = 0;
            while (d < free_dims) {
                if (++counts[static_cast<std::size_t>(d)] < points) break;
                counts[static_cast<std::size_t>(d)] = 0;
                ++d;
            }
            if (d == free_dims) break;
        }
    };

    sweep(Eigen::VectorXd::Zero(free_dims), c, c / 25.0);
    const Eigen::VectorXd coarse = best_beta.head(free_dims);
    sweep(coarse, 2.0 * c / 25.0, c / 625.0);
    return best;
}

}  // namespace oracles
