#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace copgof::copulas {

enum class Family { independence, clayton, gumbel, frank, cook_johnson };

Family family_from_string(const std::string& name);
std::string to_string(Family fam);

// Free copula parameters p: independence 0, clayton/gumbel/frank 1,
// cook_johnson 2.
int param_dim(Family fam);

// frank and cook_johnson are bivariate only; the rest support any d >= 2.
bool supports_dim(Family fam, int d);

// Parameter space: clayton lambda > 0; gumbel lambda > 1 (open, so the score
// functions exist); frank lambda in R; cook_johnson lambda1 > 0 and
// lambda2 in [0,1].
void validate(Family fam, const std::vector<double>& lambda);

double cdf(Family fam, const std::vector<double>& lambda, std::span<const double> u);
double density(Family fam, const std::vector<double>& lambda, std::span<const double> u);
double log_density(Family fam, const std::vector<double>& lambda, std::span<const double> u);

struct LogDensityGrads {
    Eigen::VectorXd grad_u;      // d components of d/du_j log c
    Eigen::VectorXd grad_lambda; // p components of d/dlambda_i log c
};
LogDensityGrads log_density_grads(Family fam, const std::vector<double>& lambda,
                                  std::span<const double> u);

// dC/du_j, a conditional df value in [0,1].
double partial_u(Family fam, const std::vector<double>& lambda, std::span<const double> u, int j);

// dC/dlambda_i (length p); the copula blocks of the K diagnostics.
Eigen::VectorXd cdf_lambda_grad(Family fam, const std::vector<double>& lambda,
                                std::span<const double> u);

// n x d sample, reproducible given the seed. Bivariate families use
// conditional inversion (bisection to 1e-12); clayton/gumbel in d > 2 use
// their Archimedean frailty representations.
Eigen::MatrixXd sample(Family fam, const std::vector<double>& lambda, int d, int n,
                       std::uint64_t seed);

double kendall_tau(Family fam, const std::vector<double>& lambda);
double spearman_rho(Family fam, const std::vector<double>& lambda);

} // namespace copgof::copulas
