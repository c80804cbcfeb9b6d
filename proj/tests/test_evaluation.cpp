#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "iqaboost/evaluation.hpp"
#include "iqaboost/rng.hpp"
#include "oracles.hpp"

using namespace iqaboost;

namespace {

std::vector<double> random_vector(std::uint64_t seed, std::size_t n, double lo = -5.0,
                                  double hi = 5.0) {
    SplitMix64 rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_double(lo, hi);
    return v;
}

double logistic_formula(const std::array<double, 5>& b, double v0) {
    return b[0] * (0.5 - 1.0 / (1.0 + std::exp(b[1] * (v0 - b[2])))) + b[3] * v0 + b[4];
}

}  // namespace

TEST_CASE("logistic map evaluation") {
    SUBCASE("identity parameters") {
        const LogisticFit fit{{0.0, 0.0, 0.0, 1.0, 0.0}};
        CHECK(apply_logistic_map(fit, 3.7) == 3.7);
    }
    SUBCASE("constant parameters") {
        const LogisticFit fit{{0.0, 0.0, 0.0, 0.0, -2.5}};
        for (double v : {-10.0, 0.0, 42.0}) CHECK(apply_logistic_map(fit, v) == -2.5);
    }
    SUBCASE("matches the formula to 1e-15") {
        const LogisticFit fit{{2.0, 1.3, -0.4, 0.5, 1.0}};
        SplitMix64 rng(5);
        for (int t = 0; t < 50; ++t) {
            const double v0 = rng.next_double(-20.0, 20.0);
            CHECK(std::abs(apply_logistic_map(fit, v0) - logistic_formula(fit.beta, v0)) < 1e-15);
        }
    }
    SUBCASE("large arguments stay finite") {
        const LogisticFit fit{{2.0, 50.0, 0.0, 0.1, 0.0}};
        CHECK(std::isfinite(apply_logistic_map(fit, 1e4)));
        CHECK(std::isfinite(apply_logistic_map(fit, -1e4)));
    }
}

TEST_CASE("logistic fitting") {
    SUBCASE("recovers a known curve through noise") {
        const std::array<double, 5> truth = {2.0, 1.0, 0.0, 0.5, 1.0};
        SplitMix64 rng(31);
        std::vector<double> v0(200), clean(200), noisy(200);
        for (std::size_t i = 0; i < v0.size(); ++i) {
            v0[i] = rng.next_double(-4.0, 4.0);
            clean[i] = logistic_formula(truth, v0[i]);
            noisy[i] = clean[i] + 0.01 * rng.next_gaussian();
        }
        const LogisticFit fit = fit_logistic_map(v0, noisy);
        CHECK(rmse(apply_logistic_map(fit, v0), clean) < 0.02);
    }
    SUBCASE("perfectly linear data fits within 1e-6") {
        std::vector<double> v0 = random_vector(8, 40);
        std::vector<double> y(v0.size());
        for (std::size_t i = 0; i < v0.size(); ++i) y[i] = -1.5 * v0[i] + 0.25;
        const LogisticFit fit = fit_logistic_map(v0, y);
        CHECK(rmse(apply_logistic_map(fit, v0), y) < 1e-6);
    }
    SUBCASE("too few points is a precondition error") {
        CHECK_THROWS_AS(fit_logistic_map({1, 2, 3, 4}, {1, 2, 3, 4}), DegenerateInputError);
    }
    SUBCASE("length mismatch is a shape error") {
        CHECK_THROWS_AS(fit_logistic_map({1, 2, 3, 4, 5}, {1, 2, 3, 4}), ShapeError);
    }
    SUBCASE("constant objective is degenerate") {
        CHECK_THROWS_AS(fit_logistic_map({2, 2, 2, 2, 2}, {1, 2, 3, 4, 5}), DegenerateInputError);
    }
    SUBCASE("never loses to the identity mapping") {
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            const std::vector<double> v0 = random_vector(hash64(100, seed), 60, 0.0, 9.0);
            std::vector<double> y(v0.size());
            SplitMix64 rng(hash64(101, seed));
            for (std::size_t i = 0; i < y.size(); ++i) {
                y[i] = 0.8 * std::tanh(v0[i] - 4.5) * 4.0 + 4.5 + rng.next_gaussian();
            }
            const LogisticFit fit = fit_logistic_map(v0, y);
            CHECK(rmse(apply_logistic_map(fit, v0), y) <= rmse(v0, y) + 1e-12);
        }
    }
}

TEST_CASE("rmse") {
    CHECK(rmse({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(rmse({1, 2}, {1, 4}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK_THROWS_AS(rmse({1, 2}, {1}), ShapeError);
    CHECK_THROWS_AS(rmse({}, {}), DegenerateInputError);

    SUBCASE("matches the naive loop oracle") {
        const auto x = random_vector(41, 1000);
        const auto y = random_vector(42, 1000);
        CHECK(std::abs(rmse(x, y) - oracles::naive_rmse(x, y)) < 1e-12);
    }
    SUBCASE("symmetry and triangle inequality") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto a = random_vector(hash64(1, seed), 64);
            const auto b = random_vector(hash64(2, seed), 64);
            const auto c = random_vector(hash64(3, seed), 64);
            CHECK(rmse(a, b) == rmse(b, a));
            CHECK(rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-12);
        }
    }
}

TEST_CASE("plcc") {
    const auto x = random_vector(51, 200);
    SUBCASE("affine targets give exactly +-1") {
        std::vector<double> up(x.size()), down(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            up[i] = 2.0 * x[i] + 1.0;
            down[i] = -x[i];
        }
        CHECK(plcc(x, up) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(plcc(x, down) == doctest::Approx(-1.0).epsilon(1e-12));
    }
    SUBCASE("matches the definition-level oracle") {
        const auto y = random_vector(52, 200);
        CHECK(std::abs(plcc(x, y) - oracles::naive_plcc(x, y)) < 1e-12);
    }
    SUBCASE("affine invariance up to sign") {
        const auto y = random_vector(53, 200);
        std::vector<double> ax(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) ax[i] = -3.0 * x[i] + 7.0;
        CHECK(std::abs(plcc(ax, y) + plcc(x, y)) < 1e-12);
    }
    SUBCASE("result is clamped to [-1, 1]") {
        CHECK(std::abs(plcc(x, x)) <= 1.0);
    }
    SUBCASE("degenerate inputs") {
        CHECK_THROWS_AS(plcc({1, 1, 1}, {1, 2, 3}), DegenerateInputError);
        CHECK_THROWS_AS(plcc({1, 2}, {3, 4}), DegenerateInputError);
        CHECK_THROWS_AS(plcc({1, 2, 3}, {1, 2}), ShapeError);
    }
}

TEST_CASE("srcc") {
    SUBCASE("reversed triple is exactly -1") {
        // Closed form: 1 - 6*8/(3*8) = -1.
        CHECK(srcc({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-15));
    }
    SUBCASE("invariant under strictly monotone transforms") {
        const auto x = random_vector(61, 100);
        const auto y = random_vector(62, 100);
        std::vector<double> fx(x.size()), gy(y.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            fx[i] = std::exp(0.5 * x[i]);
            gy[i] = std::atan(y[i]) * 3.0 + 11.0;
        }
        CHECK(srcc(fx, gy) == srcc(x, y));  // exact: identical ranks
    }
    SUBCASE("tie-free vectors reproduce the closed form to 1e-12") {
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            const auto x = random_vector(hash64(7, seed), 50);
            const auto y = random_vector(hash64(8, seed), 50);
            CHECK(std::abs(srcc(x, y) - oracles::spearman_closed_form(x, y)) < 1e-12);
        }
    }
    SUBCASE("ties receive averaged ranks") {
        // x ties (2,2): shared rank 2.5; hand-computed rank Pearson.
        const std::vector<double> x = {1, 2, 2, 3};
        const std::vector<double> y = {10, 20, 30, 40};
        const std::vector<double> rx = {1.0, 2.5, 2.5, 4.0};
        const std::vector<double> ry = {1.0, 2.0, 3.0, 4.0};
        CHECK(srcc(x, y) == doctest::Approx(oracles::naive_plcc(rx, ry)).epsilon(1e-15));
    }
    SUBCASE("all-equal input is degenerate") {
        CHECK_THROWS_AS(srcc({2, 2, 2}, {1, 2, 3}), DegenerateInputError);
    }
}

TEST_CASE("normal quantile") {
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.9995) == doctest::Approx(3.290526731491896).epsilon(1e-10));
    CHECK_THROWS_AS(normal_quantile(0.0), DegenerateInputError);
}

TEST_CASE("significance of correlation differences") {
    SUBCASE("equal coefficients are never significant") {
        const auto res = significance_diff(0.9, 0.9, 100);
        CHECK_FALSE(res.significant);
        CHECK(res.statistic == 0.0);
    }
    SUBCASE("large gaps at large n are significant") {
        const auto res = significance_diff(0.95, 0.50, 200, 0.05);
        CHECK(res.significant);
        // z = (atanh(.95) - atanh(.5)) / sqrt(2/197)
        const double expected =
            (std::atanh(0.95) - std::atanh(0.5)) / std::sqrt(2.0 / 197.0);
        CHECK(res.statistic == doctest::Approx(expected).epsilon(1e-12));
        CHECK(res.statistic > 1.96);
    }
    SUBCASE("small gaps at small n are not significant") {
        const auto res = significance_diff(0.90, 0.89, 30, 0.05);
        CHECK_FALSE(res.significant);
        CHECK(std::abs(res.statistic) < 1.96);
    }
    SUBCASE("antisymmetric statistic") {
        const auto ab = significance_diff(0.8, 0.6, 50);
        const auto ba = significance_diff(0.6, 0.8, 50);
        CHECK(ab.statistic == doctest::Approx(-ba.statistic).epsilon(1e-15));
        CHECK(ab.significant == ba.significant);
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(significance_diff(0.5, 0.5, 3), DegenerateInputError);
        CHECK_THROWS_AS(significance_diff(1.0, 0.5, 30), DegenerateInputError);
    }
}

TEST_CASE("significance threshold") {
    SUBCASE("closed form at r_base = 0") {
        for (int n : {100, 500, 2000}) {
            const double expected =
                std::tanh(normal_quantile(0.975) * std::sqrt(2.0 / (n - 3.0)));
            CHECK(std::abs(significance_threshold(0.0, n, 0.05) - expected) < 1e-4);
        }
    }
    SUBCASE("monotone in alpha and n") {
        const double base = significance_threshold(0.5, 200, 0.05);
        CHECK(significance_threshold(0.5, 200, 0.01) > base);
        CHECK(significance_threshold(0.5, 1000, 0.05) < base);
    }
    SUBCASE("brackets the decision boundary") {
        const double r_star = significance_threshold(0.8, 200, 0.05);
        CHECK(significance_diff(r_star + 1e-4, 0.8, 200, 0.05).significant);
        CHECK_FALSE(significance_diff(r_star - 1e-4, 0.8, 200, 0.05).significant);
    }
}

TEST_CASE("fold plans") {
    SUBCASE("n = 10, k = 5 gives five disjoint pairs") {
        const FoldPlan plan = make_fold_plan(10, 5, 0, 7);
        for (int f = 0; f < 5; ++f) CHECK(plan.test_indices(f).size() == 2);
    }
    SUBCASE("deterministic in all arguments") {
        const FoldPlan a = make_fold_plan(100, 5, 3, 42);
        const FoldPlan b = make_fold_plan(100, 5, 3, 42);
        CHECK(a.assignment == b.assignment);
        CHECK(a.seed == b.seed);
        const FoldPlan c = make_fold_plan(100, 5, 4, 42);
        CHECK(a.assignment != c.assignment);
    }
    SUBCASE("n = 1003 splits into 201/201/201/200/200") {
        const FoldPlan plan = make_fold_plan(1003, 5, 11, 9);
        std::multiset<std::size_t> sizes;
        std::set<std::size_t> seen;
        for (int f = 0; f < 5; ++f) {
            const auto test = plan.test_indices(f);
            sizes.insert(test.size());
            for (std::size_t idx : test) CHECK(seen.insert(idx).second);  // disjoint
        }
        CHECK(seen.size() == 1003);  // full cover
        CHECK(sizes == std::multiset<std::size_t>{200, 200, 201, 201, 201});
    }
    SUBCASE("train and test partition the index set") {
        const FoldPlan plan = make_fold_plan(57, 4, 2, 123);
        for (int f = 0; f < 4; ++f) {
            const auto test = plan.test_indices(f);
            const auto train = plan.train_indices(f);
            CHECK(test.size() + train.size() == 57);
            std::set<std::size_t> overlap;
            std::set<std::size_t> test_set(test.begin(), test.end());
            for (std::size_t idx : train) CHECK(test_set.count(idx) == 0);
        }
    }
    SUBCASE("n < k is degenerate") {
        CHECK_THROWS_AS(make_fold_plan(4, 5, 0, 0), DegenerateInputError);
        CHECK_THROWS_AS(make_fold_plan(10, 1, 0, 0), DegenerateInputError);
    }
}
