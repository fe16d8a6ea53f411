#include "copgof/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "copgof/errors.hpp"
#include "copgof/optim.hpp"

namespace copgof::estimation {

namespace cp = copgof::copulas;
namespace mg = copgof::margins;

namespace {

constexpr double gumbel_floor = 1.0 + 1e-6;

// --- transformed parameterization ------------------------------------------
// Margins: exponential log(rate); lomax (log alpha, log sigma);
// normal (mu, log sigma). Copula: clayton log(lambda);
// gumbel log(lambda - (1+1e-6)); frank identity; cook-johnson
// (log lambda1, logit lambda2).

void margin_to_raw(mg::Family fam, const double* z, std::vector<double>& theta) {
    switch (fam) {
    case mg::Family::exponential: theta = {std::exp(z[0])}; break;
    case mg::Family::lomax: theta = {std::exp(z[0]), std::exp(z[1])}; break;
    case mg::Family::normal: theta = {z[0], std::exp(z[1])}; break;
    }
}

void margin_to_trans(mg::Family fam, const std::vector<double>& theta, double* z) {
    switch (fam) {
    case mg::Family::exponential: z[0] = std::log(theta[0]); break;
    case mg::Family::lomax:
        z[0] = std::log(theta[0]);
        z[1] = std::log(theta[1]);
        break;
    case mg::Family::normal:
        z[0] = theta[0];
        z[1] = std::log(theta[1]);
        break;
    }
}

// chain-rule factor dtheta_i/dz_i (the maps above are coordinatewise)
void margin_jacobian(mg::Family fam, const std::vector<double>& theta, double* jac) {
    switch (fam) {
    case mg::Family::exponential: jac[0] = theta[0]; break;
    case mg::Family::lomax:
        jac[0] = theta[0];
        jac[1] = theta[1];
        break;
    case mg::Family::normal:
        jac[0] = 1.0;
        jac[1] = theta[1];
        break;
    }
}

std::vector<double> copula_to_raw(cp::Family fam, const double* z) {
    switch (fam) {
    case cp::Family::independence: return {};
    case cp::Family::clayton: return {std::exp(z[0])};
    case cp::Family::gumbel: return {gumbel_floor + std::exp(z[0])};
    case cp::Family::frank: return {z[0]};
    case cp::Family::cook_johnson: return {std::exp(z[0]), 1.0 / (1.0 + std::exp(-z[1]))};
    }
    return {};
}

void copula_to_trans(cp::Family fam, const std::vector<double>& lambda, double* z) {
    switch (fam) {
    case cp::Family::independence: break;
    case cp::Family::clayton: z[0] = std::log(lambda[0]); break;
    case cp::Family::gumbel: z[0] = std::log(std::max(lambda[0] - gumbel_floor, 1e-8)); break;
    case cp::Family::frank: z[0] = lambda[0]; break;
    case cp::Family::cook_johnson: {
        z[0] = std::log(lambda[0]);
        const double p = std::clamp(lambda[1], 1e-6, 1.0 - 1e-6);
        z[1] = std::log(p / (1.0 - p));
        break;
    }
    }
}

void copula_jacobian(cp::Family fam, const std::vector<double>& lambda, double* jac) {
    switch (fam) {
    case cp::Family::independence: break;
    case cp::Family::clayton: jac[0] = lambda[0]; break;
    case cp::Family::gumbel: jac[0] = lambda[0] - gumbel_floor; break;
    case cp::Family::frank: jac[0] = 1.0; break;
    case cp::Family::cook_johnson:
        jac[0] = lambda[0];
        jac[1] = lambda[1] * (1.0 - lambda[1]);
        break;
    }
}

double clamp_unit(double u) { return std::clamp(u, 1e-15, 1.0 - 1e-15); }

// Kendall-tau inversion for deterministic copula starting values.
std::vector<double> copula_tau_init(cp::Family fam, double tau) {
    switch (fam) {
    case cp::Family::independence: return {};
    case cp::Family::clayton: {
        const double t = std::clamp(tau, 0.05, 0.93);
        return {2.0 * t / (1.0 - t)};
    }
    case cp::Family::gumbel: {
        const double t = std::clamp(tau, 0.01, 0.93);
        return {std::max(1.0 / (1.0 - t), gumbel_floor + 1e-3)};
    }
    case cp::Family::frank: {
        const double t = std::clamp(tau, -0.93, 0.93);
        if (std::fabs(t) < 1e-3) return {0.0};
        double lo = -60.0, hi = 60.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (cp::kendall_tau(cp::Family::frank, {mid}) < t)
                lo = mid;
            else
                hi = mid;
        }
        return {0.5 * (lo + hi)};
    }
    case cp::Family::cook_johnson: {
        const double t = std::clamp(tau, 0.05, 0.93);
        return {2.0 * t / (1.0 - t), 0.5};
    }
    }
    return {};
}

double sample_tau(const Eigen::MatrixXd& u) {
    // O(n^2) concordance count; fitting samples are small.
    const int n = static_cast<int>(u.rows());
    long long conc = 0, disc = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double p = (u(i, 0) - u(j, 0)) * (u(i, 1) - u(j, 1));
            if (p > 0)
                ++conc;
            else if (p < 0)
                ++disc;
        }
    }
    const double pairs = 0.5 * n * (n - 1.0);
    return (conc - disc) / pairs;
}

struct PackedProblem {
    mg::Family mfam;
    cp::Family cfam;
    int d = 0;
    int m = 0;
    int p = 0;
    bool fit_copula = true;
    const Dataset* data = nullptr;
    std::vector<double> frozen_lambda;

    int dim() const { return d * m + (fit_copula ? p : 0); }

    void unpack(const Eigen::VectorXd& z, std::vector<std::vector<double>>& thetas,
                std::vector<double>& lambda) const {
        thetas.assign(static_cast<std::size_t>(d), {});
        for (int j = 0; j < d; ++j)
            margin_to_raw(mfam, z.data() + j * m, thetas[static_cast<std::size_t>(j)]);
        lambda = fit_copula ? copula_to_raw(cfam, z.data() + d * m) : frozen_lambda;
    }

    // mean negative log-likelihood and its transformed-scale gradient
    double operator()(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const {
        std::vector<std::vector<double>> thetas;
        std::vector<double> lambda;
        unpack(z, thetas, lambda);
        const int n = data->n();
        grad = Eigen::VectorXd::Zero(dim());

        double ll = 0.0;
        std::vector<double> u(static_cast<std::size_t>(d));
        Eigen::VectorXd gtheta = Eigen::VectorXd::Zero(d * m);
        Eigen::VectorXd glambda = Eigen::VectorXd::Zero(p);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) {
                const double x = data->values(i, j);
                const auto& th = thetas[static_cast<std::size_t>(j)];
                ll += mg::log_pdf(mfam, th, x);
                u[static_cast<std::size_t>(j)] = clamp_unit(mg::cdf(mfam, th, x));
            }
            ll += cp::log_density(cfam, lambda, u);
            const auto cg = cp::log_density_grads(cfam, lambda, u);
            for (int j = 0; j < d; ++j) {
                const double x = data->values(i, j);
                const auto& th = thetas[static_cast<std::size_t>(j)];
                const Eigen::VectorXd gm = mg::logpdf_param_grad(mfam, th, x) +
                                           cg.grad_u[j] * mg::cdf_param_grad(mfam, th, x);
                gtheta.segment(j * m, m) += gm;
            }
            if (fit_copula && p > 0) glambda += cg.grad_lambda;
        }

        // chain rule to the transformed scale
        std::vector<double> jac(static_cast<std::size_t>(std::max(m, 2)));
        for (int j = 0; j < d; ++j) {
            margin_jacobian(mfam, thetas[static_cast<std::size_t>(j)], jac.data());
            for (int i = 0; i < m; ++i) grad[j * m + i] = -gtheta[j * m + i] * jac[static_cast<std::size_t>(i)] / n;
        }
        if (fit_copula && p > 0) {
            copula_jacobian(cfam, lambda, jac.data());
            for (int i = 0; i < p; ++i) grad[d * m + i] = -glambda[i] * jac[static_cast<std::size_t>(i)] / n;
        }
        return -ll / n;
    }
};

Eigen::VectorXd raw_gradient_sup(const PackedProblem& prob,
                                 const std::vector<std::vector<double>>& thetas,
                                 const std::vector<double>& lambda) {
    // raw-scale joint log-likelihood gradient (for the convergence invariant)
    const Dataset& data = *prob.data;
    const int d = prob.d, m = prob.m, p = prob.fit_copula ? prob.p : 0;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d * m + p);
    std::vector<double> u(static_cast<std::size_t>(d));
    for (int i = 0; i < data.n(); ++i) {
        for (int j = 0; j < d; ++j)
            u[static_cast<std::size_t>(j)] =
                clamp_unit(mg::cdf(prob.mfam, thetas[static_cast<std::size_t>(j)], data.values(i, j)));
        const auto cg = cp::log_density_grads(prob.cfam, lambda, u);
        for (int j = 0; j < d; ++j) {
            const auto& th = thetas[static_cast<std::size_t>(j)];
            g.segment(j * m, m) += mg::logpdf_param_grad(prob.mfam, th, data.values(i, j)) +
                                   cg.grad_u[j] * mg::cdf_param_grad(prob.mfam, th, data.values(i, j));
        }
        if (p > 0) g.segment(d * m, p) += cg.grad_lambda;
    }
    return g;
}

} // namespace

void Dataset::validate() const {
    if (dim() < 2) throw invalid_parameters("dataset must have at least two columns");
    if (!values.allFinite()) throw invalid_parameters("dataset contains missing/non-finite values");
}

std::vector<int> Dataset::tied_columns() const {
    std::vector<int> out;
    for (int j = 0; j < dim(); ++j) {
        std::set<double> seen;
        bool tied = false;
        for (int i = 0; i < n() && !tied; ++i)
            if (!seen.insert(values(i, j)).second) tied = true;
        if (tied) out.push_back(j);
    }
    return out;
}

double joint_loglik(const Dataset& data, margins::Family mfam,
                    const std::vector<std::vector<double>>& thetas, copulas::Family cfam,
                    const std::vector<double>& lambda) {
    double ll = 0.0;
    std::vector<double> u(static_cast<std::size_t>(data.dim()));
    for (int i = 0; i < data.n(); ++i) {
        for (int j = 0; j < data.dim(); ++j) {
            ll += mg::log_pdf(mfam, thetas[static_cast<std::size_t>(j)], data.values(i, j));
            u[static_cast<std::size_t>(j)] =
                clamp_unit(mg::cdf(mfam, thetas[static_cast<std::size_t>(j)], data.values(i, j)));
        }
        ll += cp::log_density(cfam, lambda, u);
    }
    return ll;
}

FittedModel fit_joint_mle(const Dataset& data, margins::Family mfam, copulas::Family cfam,
                          const std::optional<std::vector<double>>& lambda_init) {
    data.validate();
    const int d = data.dim(), m = mg::param_dim(mfam), p = cp::param_dim(cfam);
    if (!cp::supports_dim(cfam, d))
        throw invalid_parameters("copula family does not support the data dimension");
    if (data.n() < d * m + p + 1) throw invalid_parameters("too few observations for joint fit");
    for (int j = 0; j < d; ++j) {
        const auto col = data.values.col(j);
        if ((col.array() == col[0]).all()) throw degenerate_data("constant data column");
        for (int i = 0; i < data.n(); ++i)
            if (!mg::in_support(mfam, col[i]))
                throw support_violation("observation outside the margin support");
    }

    PackedProblem prob;
    prob.mfam = mfam;
    prob.cfam = cfam;
    prob.d = d;
    prob.m = m;
    prob.p = p;
    prob.fit_copula = true;
    prob.data = &data;

    // deterministic multi-start: marginal-fit + tau inversion, a canonical
    // midpoint, and a perturbation of the first start
    std::vector<std::vector<double>> theta_start(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
        const auto col = data.values.col(j);
        theta_start[static_cast<std::size_t>(j)] =
            mg::fit_mle(mfam, std::span<const double>(col.data(), static_cast<std::size_t>(data.n())))
                .theta;
    }
    std::vector<double> lambda_start;
    if (p > 0) {
        if (lambda_init) {
            cp::validate(cfam, *lambda_init);
            lambda_start = *lambda_init;
        } else {
            Eigen::MatrixXd u0(data.n(), d);
            for (int i = 0; i < data.n(); ++i)
                for (int j = 0; j < d; ++j)
                    u0(i, j) = clamp_unit(
                        mg::cdf(mfam, theta_start[static_cast<std::size_t>(j)], data.values(i, j)));
            lambda_start = copula_tau_init(cfam, d == 2 ? sample_tau(u0) : 0.3);
        }
    }

    auto pack = [&](const std::vector<std::vector<double>>& ths, const std::vector<double>& lam) {
        Eigen::VectorXd z(prob.dim());
        for (int j = 0; j < d; ++j)
            margin_to_trans(mfam, ths[static_cast<std::size_t>(j)], z.data() + j * m);
        if (p > 0) copula_to_trans(cfam, lam, z.data() + d * m);
        return z;
    };

    std::vector<Eigen::VectorXd> starts;
    starts.push_back(pack(theta_start, lambda_start));
    {
        std::vector<std::vector<double>> th_mid(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            const auto col = data.values.col(j);
            th_mid[static_cast<std::size_t>(j)] = mg::moment_init(
                mfam, std::span<const double>(col.data(), static_cast<std::size_t>(data.n())));
        }
        std::vector<double> lam_mid;
        switch (cfam) {
        case cp::Family::independence: break;
        case cp::Family::clayton: lam_mid = {1.0}; break;
        case cp::Family::gumbel: lam_mid = {2.0}; break;
        case cp::Family::frank: lam_mid = {2.0}; break;
        case cp::Family::cook_johnson: lam_mid = {1.0, 0.5}; break;
        }
        starts.push_back(pack(th_mid, lam_mid));
        starts.push_back(starts[0] + Eigen::VectorXd::Constant(prob.dim(), 0.25));
    }

    OptimOptions opts;
    opts.max_iterations = 400;
    opts.grad_tol = 1e-9;
    OptimResult best;
    best.value = std::numeric_limits<double>::infinity();
    int starts_tried = 0;
    for (const auto& z0 : starts) {
        const auto r = minimize_bfgs([&](const Eigen::VectorXd& z, Eigen::VectorXd& g) {
            try {
                return prob(z, g);
            } catch (const error&) {
                return std::numeric_limits<double>::infinity();
            }
        }, z0, opts);
        ++starts_tried;
        if (std::isfinite(r.value) && r.value < best.value) best = r;
    }
    if (!std::isfinite(best.value)) throw non_convergence("joint fit failed from every start");

    FittedModel out;
    out.margin_family = mfam;
    out.copula_family = cfam;
    out.copula_fixed = false;
    out.mode = FitMode::full_joint_ml;
    prob.unpack(best.x, out.thetas, out.lambda);
    out.loglik = joint_loglik(data, mfam, out.thetas, cfam, out.lambda);
    out.diagnostics.iterations = best.iterations;
    out.diagnostics.starts_tried = starts_tried;
    out.diagnostics.grad_sup_norm =
        raw_gradient_sup(prob, out.thetas, out.lambda).lpNorm<Eigen::Infinity>();
    out.diagnostics.converged = out.diagnostics.grad_sup_norm < 1e-6 * data.n();
    if (!out.diagnostics.converged)
        throw non_convergence("joint fit gradient above tolerance: " +
                              std::to_string(out.diagnostics.grad_sup_norm));

    if (cfam == cp::Family::gumbel && out.lambda[0] < gumbel_floor + 1e-6)
        out.diagnostics.warnings.push_back("gumbel lambda at the lower boundary");
    if (cfam == cp::Family::cook_johnson &&
        (out.lambda[1] < 1e-6 || out.lambda[1] > 1.0 - 1e-6))
        out.diagnostics.warnings.push_back(
            "cook-johnson lambda2 at the boundary of [0,1]; transform assumptions degrade");
    return out;
}

FittedModel fit_margins_only(const Dataset& data, margins::Family mfam, copulas::Family cfam,
                             const std::vector<double>& frozen_lambda) {
    data.validate();
    cp::validate(cfam, frozen_lambda);
    if (!cp::supports_dim(cfam, data.dim()))
        throw invalid_parameters("copula family does not support the data dimension");

    FittedModel out;
    out.margin_family = mfam;
    out.copula_family = cfam;
    out.lambda = frozen_lambda;
    out.copula_fixed = true;
    out.mode = FitMode::margins_only_fixed_copula;
    out.thetas.resize(static_cast<std::size_t>(data.dim()));
    double grad_sup = 0.0;
    int iters = 0;
    for (int j = 0; j < data.dim(); ++j) {
        const auto col = data.values.col(j);
        const auto fit = mg::fit_mle(
            mfam, std::span<const double>(col.data(), static_cast<std::size_t>(data.n())));
        out.thetas[static_cast<std::size_t>(j)] = fit.theta;
        grad_sup = std::max(grad_sup, fit.grad_sup_norm);
        iters = std::max(iters, fit.iterations);
    }
    out.loglik = joint_loglik(data, mfam, out.thetas, cfam, out.lambda);
    out.diagnostics.converged = true;
    out.diagnostics.iterations = iters;
    out.diagnostics.grad_sup_norm = grad_sup;
    out.diagnostics.starts_tried = 1;
    return out;
}

Eigen::MatrixXd pseudo_observations(const Dataset& data, const FittedModel& fitted,
                                    std::vector<std::string>* warnings) {
    data.validate();
    Eigen::MatrixXd u(data.n(), data.dim());
    for (int j = 0; j < data.dim(); ++j)
        for (int i = 0; i < data.n(); ++i)
            u(i, j) = clamp_unit(
                mg::cdf(fitted.margin_family, fitted.thetas[static_cast<std::size_t>(j)],
                        data.values(i, j)));
    if (warnings) {
        for (int j : data.tied_columns())
            warnings->push_back("ties detected in column " +
                                (j < static_cast<int>(data.labels.size())
                                     ? data.labels[static_cast<std::size_t>(j)]
                                     : std::to_string(j)));
    }
    return u;
}

} // namespace copgof::estimation
