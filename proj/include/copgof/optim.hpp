#pragma once

#include <Eigen/Core>
#include <functional>

namespace copgof {

struct OptimOptions {
    int max_iterations = 200;
    // Sup-norm tolerance on the gradient of the *mean* objective (objective
    // callers pass is typically a negative log-likelihood divided by n).
    double grad_tol = 1e-8;
    double step_tol = 1e-14;
};

struct OptimResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    bool converged = false;
};

// Objective: f(x, grad_out) -> value, writing the gradient into grad_out.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Safeguarded BFGS minimizer with Armijo backtracking. Non-finite trial
// points are treated as +infinity so the line search backs away from
// parameter-space boundaries on its own.
OptimResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                          const OptimOptions& opts = {});

} // namespace copgof
