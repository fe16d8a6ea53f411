#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "copgof/copulas.hpp"
#include "copgof/margins.hpp"

namespace copgof::estimation {

struct Dataset {
    Eigen::MatrixXd values; // n x d
    std::vector<std::string> labels;

    int n() const { return static_cast<int>(values.rows()); }
    int dim() const { return static_cast<int>(values.cols()); }

    // Throws on NaN/inf entries or d < 2.
    void validate() const;

    // Columns containing duplicate values (the paper's setting is continuous,
    // so ties indicate a data problem).
    std::vector<int> tied_columns() const;
};

enum class FitMode { full_joint_ml, margins_only_fixed_copula };

struct FitDiagnostics {
    int iterations = 0;
    bool converged = false;
    double grad_sup_norm = 0.0; // raw-scale joint log-likelihood gradient at the optimum
    int starts_tried = 0;
    std::vector<std::string> warnings;
};

struct FittedModel {
    margins::Family margin_family{};
    std::vector<std::vector<double>> thetas; // one vector per column
    copulas::Family copula_family{};
    std::vector<double> lambda;
    bool copula_fixed = false; // true: p treated as 0 in the score vector
    FitMode mode = FitMode::full_joint_ml;
    double loglik = 0.0;
    FitDiagnostics diagnostics;
};

double joint_loglik(const Dataset& data, margins::Family mfam,
                    const std::vector<std::vector<double>>& thetas, copulas::Family cfam,
                    const std::vector<double>& lambda);

// Full maximum likelihood over margins and copula parameters jointly,
// multi-started from three deterministic initial points.
FittedModel fit_joint_mle(const Dataset& data, margins::Family mfam, copulas::Family cfam,
                          const std::optional<std::vector<double>>& lambda_init = std::nullopt);

// Per-column marginal ML with the copula frozen at the given parameters
// (the fully specified null of Remark 6).
FittedModel fit_margins_only(const Dataset& data, margins::Family mfam, copulas::Family cfam,
                             const std::vector<double>& frozen_lambda);

// U_ij = F_{theta_j}(X_ij). Values are nudged into the open cube at machine
// resolution; a tie warning is appended for columns with duplicates.
Eigen::MatrixXd pseudo_observations(const Dataset& data, const FittedModel& fitted,
                                    std::vector<std::string>* warnings = nullptr);

} // namespace copgof::estimation
