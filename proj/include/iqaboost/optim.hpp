#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "iqaboost/errors.hpp"

namespace iqaboost {

// Residual/Jacobian pair over a flat parameter vector. jacobian_fn(theta)
// must return the n x p matrix of partial derivatives of residual_fn(theta).
struct LeastSquaresProblem {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residual_fn;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian_fn;
    Eigen::VectorXd theta0;
};

struct LMOptions {
    double lambda0 = 1e-3;
    double lambda_up = 10.0;
    double lambda_down = 0.1;
    int max_iters = 200;
    double grad_tol = 1e-8;
    double step_tol = 1e-10;
};

enum class LMStatus { kConvergedGradient, kConvergedStep, kMaxIters, kLambdaOverflow };

std::string to_string(LMStatus status);

struct LMResult {
    Eigen::VectorXd theta;
    double final_cost = 0.0;  // 0.5 * ||r||^2
    int iterations = 0;       // linear solves attempted (accepted + rejected)
    LMStatus status = LMStatus::kMaxIters;
};

// Damped Gauss-Newton: iterates (J'J + lambda*I) d = -J'r, accepting steps
// that reduce the cost. Deterministic for fixed inputs; accepted costs are
// strictly decreasing. Throws NumericError if the residual or Jacobian turn
// non-finite; unsolvable damping escalation ends with kLambdaOverflow.
LMResult lm_fit(const LeastSquaresProblem& problem, const LMOptions& opts = {});

}  // namespace iqaboost
