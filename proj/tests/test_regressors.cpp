#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>

#include "iqaboost/regressors.hpp"
#include "iqaboost/rng.hpp"
#include "oracles.hpp"

using namespace iqaboost;

namespace {

Eigen::MatrixXd random_matrix(std::uint64_t seed, int rows, int cols) {
    SplitMix64 rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = rng.next_gaussian();
    }
    return m;
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

// Forward pass recomputed from the stored fields, independent of predict_nn.
double nn_forward_oracle(const NNModel& m, const Eigen::VectorXd& x) {
    double out = m.b2;
    for (int h = 0; h < m.hidden_dim; ++h) {
        double act = m.b1(h);
        for (int j = 0; j < m.input_dim; ++j) {
            act += m.w1(h, j) * (x(j) - m.input_standardization.mean(j)) /
                   m.input_standardization.std(j);
        }
        out += m.w2(h) * std::tanh(act);
    }
    return m.target_scaling.mean + m.target_scaling.std * out;
}

}  // namespace

TEST_CASE("NN training fits a linear target to near-zero error") {
    const int n = 50;
    const int m = 2;
    const Eigen::MatrixXd x = random_matrix(11, n, m);
    const Eigen::VectorXd y = 2.0 * x.col(0) - 0.7 * x.col(1) +
                              Eigen::VectorXd::Constant(n, 3.0);
    const NNModel model = train_nn(x, y, 4, 1);

    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
        const double pred = predict_nn(model, x.row(i).transpose());
        const double res = (pred - y(i)) / model.target_scaling.std;  // standardized units
        sse += res * res;
        CHECK(std::abs(pred - y(i)) < 1e-3);
    }
    CHECK(sse / n < 1e-6);
}

TEST_CASE("NN preconditions and degenerate inputs") {
    const Eigen::MatrixXd x = random_matrix(5, 3, 3);
    const Eigen::VectorXd y = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(train_nn(x, y, 3, 0), DegenerateInputError);  // n == m

    Eigen::MatrixXd with_constant = random_matrix(6, 10, 2);
    with_constant.col(1).setConstant(4.2);
    CHECK_THROWS_WITH_AS(train_nn(with_constant, random_matrix(7, 10, 1).col(0), 2, 0),
                         doctest::Contains("column 1"), DegenerateInputError);

    CHECK_THROWS_AS(train_nn(x, y, 0, 0), DegenerateInputError);
}

TEST_CASE("NN training is deterministic per seed") {
    const Eigen::MatrixXd x = random_matrix(21, 40, 3);
    const Eigen::VectorXd y = random_matrix(22, 40, 1).col(0);
    const NNModel a = train_nn(x, y, 5, 1234);
    const NNModel b = train_nn(x, y, 5, 1234);
    CHECK(same_bits(a.b1, b.b1));
    CHECK(same_bits(a.w2, b.w2));
    CHECK(std::memcmp(a.w1.data(), b.w1.data(),
                      sizeof(double) * static_cast<std::size_t>(a.w1.size())) == 0);
    CHECK(a.b2 == b.b2);
    CHECK(nn_model_to_json(a) == nn_model_to_json(b));

    const NNModel c = train_nn(x, y, 5, 1235);
    CHECK_FALSE(same_bits(a.w2, c.w2));
}

TEST_CASE("NN prediction contracts") {
    const Eigen::MatrixXd x = random_matrix(31, 30, 2);
    const Eigen::VectorXd y = random_matrix(32, 30, 1).col(0);
    NNModel model = train_nn(x, y, 3, 7);

    SUBCASE("zero weights predict the target mean") {
        model.w1.setZero();
        model.b1.setZero();
        model.w2.setZero();
        model.b2 = 0.0;
        CHECK(predict_nn(model, Eigen::Vector2d(10.0, -4.0)) ==
              doctest::Approx(model.target_scaling.mean).epsilon(1e-15));
    }
    SUBCASE("forward pass matches an independent re-evaluation") {
        SplitMix64 rng(44);
        for (int t = 0; t < 20; ++t) {
            const Eigen::VectorXd probe = Eigen::Vector2d(rng.next_gaussian(), rng.next_gaussian());
            CHECK(std::abs(predict_nn(model, probe) - nn_forward_oracle(model, probe)) < 1e-12);
        }
    }
    SUBCASE("length mismatch is a shape error") {
        CHECK_THROWS_AS(predict_nn(model, Eigen::Vector3d(1, 2, 3)), ShapeError);
    }
}

TEST_CASE("standardization makes raw input units immaterial") {
    const Eigen::MatrixXd x = random_matrix(51, 40, 3);
    const Eigen::VectorXd y = random_matrix(52, 40, 1).col(0);
    const NNModel base = train_nn(x, y, 4, 5);
    const SVRModel base_svr = train_svr(x, y);

    // Jointly rescale a raw column and its stored statistics.
    NNModel scaled = base;
    SVRModel scaled_svr = base_svr;
    const double a = -3.5;
    const double b = 12.0;
    scaled.input_standardization.mean(1) = a * base.input_standardization.mean(1) + b;
    scaled.input_standardization.std(1) = std::abs(a) * base.input_standardization.std(1);
    scaled_svr.input_standardization.mean(1) = a * base_svr.input_standardization.mean(1) + b;
    scaled_svr.input_standardization.std(1) = std::abs(a) * base_svr.input_standardization.std(1);
    // Negative scale flips the standardized sign; fold it into the weights.
    scaled.w1.col(1) *= (a < 0 ? -1.0 : 1.0);
    scaled_svr.w(1) *= (a < 0 ? -1.0 : 1.0);

    SplitMix64 rng(53);
    for (int t = 0; t < 25; ++t) {
        Eigen::VectorXd probe(3);
        probe << rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian();
        Eigen::VectorXd probe_scaled = probe;
        probe_scaled(1) = a * probe(1) + b;
        CHECK(std::abs(predict_nn(base, probe) - predict_nn(scaled, probe_scaled)) < 1e-10);
        CHECK(std::abs(predict_svr(base_svr, probe) - predict_svr(scaled_svr, probe_scaled)) < 1e-10);
    }
}

TEST_CASE("SVR recovers a clean linear relation") {
    Eigen::MatrixXd x(5, 1);
    x << -2, -1, 0, 1, 2;
    const Eigen::VectorXd y = 2.0 * x.col(0);
    const SVRModel model = train_svr(x, y, 1e6, 0.0);

    // Effective raw-space slope: w scaled by the stored statistics.
    const double slope =
        model.w(0) * model.target_scaling.std / model.input_standardization.std(0);
    CHECK(std::abs(slope - 2.0) < 1e-2);
    CHECK(std::abs(model.w(0) - 1.0) < 5e-3);  // standardized space
    CHECK(std::abs(predict_svr(model, Eigen::VectorXd::Constant(1, 3.0)) - 6.0) < 0.05);
}

TEST_CASE("SVR with a constant target returns the constant") {
    Eigen::MatrixXd x(4, 1);
    x << 1, 2, 3, 4;
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(4, 7.25);
    const SVRModel model = train_svr(x, y);
    CHECK(model.w(0) == 0.0);
    CHECK(model.b == 0.0);  // standardized bias
    CHECK(predict_svr(model, Eigen::VectorXd::Constant(1, 9.0)) == doctest::Approx(7.25));
}

TEST_CASE("SMO dual objective matches brute-force grid search on tiny instances") {
    SplitMix64 rng(808);
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 3 + static_cast<int>(rng.next_below(3));  // 3..5
        Eigen::MatrixXd x(n, 1);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            x(i, 0) = rng.next_gaussian() * 2.0;
            y(i) = 1.5 * x(i, 0) + rng.next_gaussian() * 0.5;
        }
        // Guard the standardizer against accidental duplicate columns.
        if (std::abs(x.col(0).maxCoeff() - x.col(0).minCoeff()) < 1e-6) continue;

        SvrTrainInfo info;
        const SVRModel model = train_svr_detailed(x, y, 1.0, 0.1, {}, &info);
        CHECK(info.worst_kkt_violation <= 1e-3);
        CHECK(info.beta.lpNorm<Eigen::Infinity>() <= 1.0 + 1e-12);

        const Eigen::VectorXd xs_col =
            (x.col(0).array() - model.input_standardization.mean(0)) /
            model.input_standardization.std(0);
        Eigen::MatrixXd xs(n, 1);
        xs.col(0) = xs_col;
        const Eigen::VectorXd ys =
            (y.array() - model.target_scaling.mean) / model.target_scaling.std;
        const double grid_best = oracles::svr_dual_grid_search(xs, ys, 1.0, 0.1);
        CHECK(std::abs(info.dual_objective - grid_best) < 1e-3);
        CHECK(info.dual_objective >= grid_best - 1e-3);
    }
}

TEST_CASE("SVR training rejects bad inputs") {
    Eigen::MatrixXd x(4, 1);
    x << 1, 2, 3, 4;
    Eigen::VectorXd y(4);
    y << 1, 2, 3, 4;
    CHECK_THROWS_AS(train_svr(x, y, -1.0, 0.1), DegenerateInputError);
    CHECK_THROWS_AS(train_svr(x, y, 1.0, -0.1), DegenerateInputError);
    Eigen::VectorXd bad = y;
    bad(2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train_svr(x, bad), NumericError);
    CHECK_THROWS_AS(train_svr(Eigen::MatrixXd(1, 1), Eigen::VectorXd(1)), DegenerateInputError);
}

TEST_CASE("training rows always predict to finite values") {
    SplitMix64 rng(606);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 12 + static_cast<int>(rng.next_below(30));
        const int m = 1 + static_cast<int>(rng.next_below(4));
        const Eigen::MatrixXd x = random_matrix(hash64(70, static_cast<std::uint64_t>(trial)), n, m);
        const Eigen::VectorXd y =
            random_matrix(hash64(71, static_cast<std::uint64_t>(trial)), n, 1).col(0) * 4.0;
        const NNModel nn = train_nn(x, y, 3, 42);
        const SVRModel svr = train_svr(x, y);
        for (int i = 0; i < n; ++i) {
            CHECK(std::isfinite(predict_nn(nn, x.row(i).transpose())));
            CHECK(std::isfinite(predict_svr(svr, x.row(i).transpose())));
        }
    }
}

TEST_CASE("SVR prediction contracts") {
    Eigen::MatrixXd x(6, 2);
    x << 1, 2, 2, 1, 3, 4, 4, 3, 5, 6, 6, 5;
    const Eigen::VectorXd y = x.col(0) + x.col(1);
    SVRModel model = train_svr(x, y);
    SUBCASE("zero weights predict the target mean") {
        model.w.setZero();
        model.b = 0.0;
        CHECK(predict_svr(model, Eigen::Vector2d(100.0, -3.0)) ==
              doctest::Approx(model.target_scaling.mean));
    }
    SUBCASE("dot-product re-evaluation matches") {
        const Eigen::VectorXd probe = Eigen::Vector2d(2.5, 3.5);
        const Eigen::VectorXd xs = model.input_standardization.apply(probe);
        const double expected =
            model.target_scaling.mean + model.target_scaling.std * (model.w.dot(xs) + model.b);
        CHECK(std::abs(predict_svr(model, probe) - expected) < 1e-12);
    }
    SUBCASE("length mismatch is a shape error") {
        CHECK_THROWS_AS(predict_svr(model, Eigen::Vector3d(1, 2, 3)), ShapeError);
    }
}

TEST_CASE("model JSON round trips are bit-exact") {
    const Eigen::MatrixXd x = random_matrix(81, 25, 3);
    const Eigen::VectorXd y = random_matrix(82, 25, 1).col(0);
    const NNModel nn = train_nn(x, y, 4, 31);
    const SVRModel svr = train_svr(x, y);

    const NNModel nn2 = nn_model_from_json(nn_model_to_json(nn));
    CHECK(std::memcmp(nn.w1.data(), nn2.w1.data(),
                      sizeof(double) * static_cast<std::size_t>(nn.w1.size())) == 0);
    CHECK(same_bits(nn.b1, nn2.b1));
    CHECK(same_bits(nn.w2, nn2.w2));
    CHECK(nn.b2 == nn2.b2);
    CHECK(same_bits(nn.input_standardization.mean, nn2.input_standardization.mean));
    CHECK(nn.target_scaling.std == nn2.target_scaling.std);
    CHECK(nn_model_to_json(nn2) == nn_model_to_json(nn));

    const SVRModel svr2 = svr_model_from_json(svr_model_to_json(svr));
    CHECK(same_bits(svr.w, svr2.w));
    CHECK(svr.b == svr2.b);
    CHECK(svr_model_to_json(svr2) == svr_model_to_json(svr));

    CHECK_THROWS_AS(nn_model_from_json("{}"), ParseError);
    CHECK_THROWS_AS(svr_model_from_json(nn_model_to_json(nn)), ParseError);
}
