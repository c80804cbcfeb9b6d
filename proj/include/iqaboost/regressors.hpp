#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "iqaboost/errors.hpp"
#include "iqaboost/optim.hpp"

namespace iqaboost {

// Per-column z-score statistics, fitted on training data only.
struct ColumnStandardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    // Population std (divisor n). Throws DegenerateInputError naming the
    // first constant column.
    static ColumnStandardization fit(const Eigen::MatrixXd& x);

    Eigen::VectorXd apply(const Eigen::VectorXd& raw) const;
    Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
};

// Target z-score; a zero-spread target scales by 1 so constant targets stay
// representable.
struct TargetScaling {
    double mean = 0.0;
    double std = 1.0;

    static TargetScaling fit(const Eigen::VectorXd& y);
    Eigen::VectorXd to_standard(const Eigen::VectorXd& y) const;
    double from_standard(double v) const { return mean + std * v; }
};

// ---------------------------------------------------------------------------
// Neural network: one tanh hidden layer, linear output, trained by lm_fit on
// the summed squared error in standardized units.
// ---------------------------------------------------------------------------

struct NNModel {
    int input_dim = 0;
    int hidden_dim = 0;
    Eigen::MatrixXd w1;  // hidden_dim x input_dim
    Eigen::VectorXd b1;  // hidden_dim
    Eigen::VectorXd w2;  // hidden_dim
    double b2 = 0.0;
    ColumnStandardization input_standardization;
    TargetScaling target_scaling;
};

// Weight init: uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from the seeded
// counter-based stream, drawn in the order w1 (row-major), b1, w2, b2; fan_in
// is input_dim for the hidden layer and hidden_dim for the output layer.
NNModel train_nn(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int hidden_dim,
                 std::uint64_t seed, const LMOptions& lm_opts = {});

double predict_nn(const NNModel& model, const Eigen::VectorXd& raw_input);

// ---------------------------------------------------------------------------
// Linear epsilon-SVR trained by SMO pair updates on the dual.
// ---------------------------------------------------------------------------

struct SVRModel {
    Eigen::VectorXd w;  // length input_dim, standardized space
    double b = 0.0;
    double c = 1.0;
    double epsilon = 0.1;  // standardized target units
    ColumnStandardization input_standardization;
    TargetScaling target_scaling;
};

struct SvrOptions {
    double kkt_tolerance = 1e-3;
    // Pair updates allowed before declaring non-convergence; <0 means ten
    // passes-per-sample (10 * n * n pair updates).
    long max_updates = -1;
};

struct SvrTrainInfo {
    Eigen::VectorXd beta;    // alpha_i - alpha_i^* per sample
    double dual_objective = 0.0;
    double worst_kkt_violation = 0.0;
    long updates = 0;
};

SVRModel train_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c = 1.0,
                   double epsilon = 0.1, const SvrOptions& opts = {});

// Same as train_svr but also reports the solver state for audits and oracles.
SVRModel train_svr_detailed(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c,
                            double epsilon, const SvrOptions& opts, SvrTrainInfo* info);

double predict_svr(const SVRModel& model, const Eigen::VectorXd& raw_input);

// ---------------------------------------------------------------------------
// Versioned JSON serialization; doubles are written in shortest round-trip
// decimal form so deserialization is bit-exact.
// ---------------------------------------------------------------------------

std::string nn_model_to_json(const NNModel& model);
NNModel nn_model_from_json(const std::string& text);

std::string svr_model_to_json(const SVRModel& model);
SVRModel svr_model_from_json(const std::string& text);

}  // namespace iqaboost
