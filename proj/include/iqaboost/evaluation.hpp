#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "iqaboost/errors.hpp"

namespace iqaboost {

// ---------------------------------------------------------------------------
// Five-parameter monotone mapping fitted between objective and subjective
// scores before accuracy and linearity are measured:
//   V(v0) = b1 * (1/2 - 1/(1 + exp(b2*(v0 - b3)))) + b4*v0 + b5
// ---------------------------------------------------------------------------

struct LogisticFit {
    std::array<double, 5> beta{};
};

// Least-squares fit by lm_fit over a fixed multi-start set (three b3 anchors
// times both b2 signs, plus an identity-like start), best final cost wins.
// Requires n >= 5 and nonzero spread in `objective`.
LogisticFit fit_logistic_map(const std::vector<double>& objective,
                             const std::vector<double>& subjective);

double apply_logistic_map(const LogisticFit& fit, double v0);

std::vector<double> apply_logistic_map(const LogisticFit& fit, const std::vector<double>& v0);

// ---------------------------------------------------------------------------
// Accuracy / linearity / ranking criteria
// ---------------------------------------------------------------------------

double rmse(const std::vector<double>& x, const std::vector<double>& y);

// Pearson coefficient, clamped to [-1, 1] against rounding. Requires n >= 3
// and nonzero spread on both sides.
double plcc(const std::vector<double>& x, const std::vector<double>& y);

// Pearson correlation of average ranks; ties share the mean of their rank
// span. Tie-free inputs reproduce 1 - 6*sum(D^2)/(N(N^2-1)) exactly.
double srcc(const std::vector<double>& x, const std::vector<double>& y);

struct CriterionResult {
    double rmse = 0.0;
    double plcc = 0.0;
    double srcc = 0.0;
    int n = 0;
};

// ---------------------------------------------------------------------------
// Correlation-difference significance (Fisher z, two-tailed)
// ---------------------------------------------------------------------------

struct SignificanceResult {
    bool significant = false;
    double statistic = 0.0;  // (z1 - z2) / sqrt(2/(n-3)), signed
};

// Inverse standard-normal CDF, |error| < 1e-13 after refinement.
double normal_quantile(double p);

SignificanceResult significance_diff(double r1, double r2, int n, double alpha = 0.05);

// Smallest r* > r_base whose improvement over r_base is significant at
// `alpha`, located by bisection to 1e-6.
double significance_threshold(double r_base, int n, double alpha = 0.05);

// ---------------------------------------------------------------------------
// Seeded k-fold partition
// ---------------------------------------------------------------------------

struct FoldPlan {
    int run_index = 0;
    std::uint64_t seed = 0;  // the shuffle seed actually used
    std::vector<int> assignment;  // per-stimulus fold label in [0, k)
    int k = 0;

    std::vector<std::size_t> test_indices(int fold) const;
    std::vector<std::size_t> train_indices(int fold) const;
};

// Seeded shuffle dealt round-robin into k folds; fold sizes differ by at most
// one. Pure function of (n, k, run_index, master_seed).
FoldPlan make_fold_plan(std::size_t n, int k, int run_index, std::uint64_t master_seed);

}  // namespace iqaboost
