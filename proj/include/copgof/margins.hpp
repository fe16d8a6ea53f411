#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

namespace copgof::margins {

enum class Family { exponential, lomax, normal };

Family family_from_string(const std::string& name);
std::string to_string(Family fam);

// Number of free parameters m: exponential 1 (rate), lomax 2 (tail, scale),
// normal 2 (mean, sd).
int param_dim(Family fam);

// Throws invalid_parameters unless theta lies in the open parameter space.
void validate(Family fam, const std::vector<double>& theta);

bool in_support(Family fam, double x);

double cdf(Family fam, const std::vector<double>& theta, double x);
double quantile(Family fam, const std::vector<double>& theta, double u);
double log_pdf(Family fam, const std::vector<double>& theta, double x);

// Parameter score of the cdf: (dF/dtheta_1, ..., dF/dtheta_m) at x.
Eigen::VectorXd cdf_param_grad(Family fam, const std::vector<double>& theta, double x);

// dF/dtheta composed with the quantile, plus its u-derivative. These are the
// two margin ingredients of the score vector k. Guarded away from the
// boundary: u outside (1e-12, 1-1e-12) is a domain error since heavy-tail
// scale families can diverge there.
struct ScoreAtQuantile {
    Eigen::VectorXd value;
    Eigen::VectorXd du;
};
ScoreAtQuantile score_at_quantile(Family fam, const std::vector<double>& theta, double u);

// Parameter gradient of log f (used by joint maximum likelihood).
Eigen::VectorXd logpdf_param_grad(Family fam, const std::vector<double>& theta, double x);

double loglik(Family fam, const std::vector<double>& theta, std::span<const double> data);
Eigen::VectorXd loglik_grad(Family fam, const std::vector<double>& theta,
                            std::span<const double> data);

struct FitResult {
    std::vector<double> theta;
    double loglik = 0.0;
    double grad_sup_norm = 0.0; // sup-norm of the raw log-likelihood gradient at theta
    int iterations = 0;
    bool converged = false;
};

// Marginal maximum likelihood. Normal and exponential are closed form; lomax
// runs a safeguarded quasi-Newton iteration on (log alpha, log sigma).
FitResult fit_mle(Family fam, std::span<const double> data);

// Deterministic moment-based starting values (also used by joint fitting).
std::vector<double> moment_init(Family fam, std::span<const double> data);

} // namespace copgof::margins
