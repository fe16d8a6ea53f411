#include "copgof/optim.hpp"

#include <cmath>
#include <limits>

namespace copgof {

namespace {

bool finite(double v) { return std::isfinite(v); }

double eval(const Objective& f, const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double v = f(x, g);
    if (!finite(v) || !g.allFinite()) return std::numeric_limits<double>::infinity();
    return v;
}

} // namespace

OptimResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const OptimOptions& opts) {
    const auto n = x0.size();
    OptimResult res;
    res.x = x0;
    res.gradient.resize(n);

    Eigen::VectorXd g(n);
    double fx = eval(f, res.x, g);
    if (!finite(fx)) {
        // Infeasible start; report as-is, callers multi-start around this.
        res.value = fx;
        res.gradient = g;
        return res;
    }

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd x_new(n), g_new(n);

    for (int it = 0; it < opts.max_iterations; ++it) {
        if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
            res.converged = true;
            res.iterations = it;
            break;
        }
        Eigen::VectorXd dir = -(H * g);
        double slope = g.dot(dir);
        if (!(slope < 0.0)) { // not a descent direction, reset
            H.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }

        // Armijo backtracking
        double step = 1.0;
        constexpr double c1 = 1e-4;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = res.x + step * dir;
            f_new = eval(f, x_new, g_new);
            if (finite(f_new) && f_new <= fx + c1 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || step * dir.lpNorm<Eigen::Infinity>() < opts.step_tol) {
            res.iterations = it;
            res.converged = g.lpNorm<Eigen::Infinity>() < opts.grad_tol * 10.0;
            break;
        }

        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            // BFGS inverse-Hessian update
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            const Eigen::MatrixXd V = I - rho * s * y.transpose();
            H = V * H * V.transpose() + rho * s * s.transpose();
        }
        res.x = x_new;
        fx = f_new;
        g = g_new;
        res.iterations = it + 1;
    }

    if (!res.converged && g.lpNorm<Eigen::Infinity>() < opts.grad_tol) res.converged = true;
    res.value = fx;
    res.gradient = g;
    return res;
}

} // namespace copgof
