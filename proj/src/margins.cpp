#include "copgof/margins.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "copgof/errors.hpp"
#include "copgof/math.hpp"
#include "copgof/optim.hpp"

namespace copgof::margins {

namespace {

constexpr double u_guard = 1e-12;

void require_param_count(Family fam, const std::vector<double>& theta) {
    if (static_cast<int>(theta.size()) != param_dim(fam))
        throw invalid_parameters("margin parameter vector has wrong length for " + to_string(fam));
}

double sample_mean(std::span<const double> data) {
    return std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(data.size());
}

} // namespace

Family family_from_string(const std::string& name) {
    if (name == "exponential" || name == "exp") return Family::exponential;
    if (name == "lomax") return Family::lomax;
    if (name == "normal" || name == "gaussian") return Family::normal;
    throw invalid_parameters("unknown margin family: " + name);
}

std::string to_string(Family fam) {
    switch (fam) {
    case Family::exponential: return "exponential";
    case Family::lomax: return "lomax";
    case Family::normal: return "normal";
    }
    return "?";
}

int param_dim(Family fam) { return fam == Family::exponential ? 1 : 2; }

void validate(Family fam, const std::vector<double>& theta) {
    require_param_count(fam, theta);
    for (double t : theta)
        if (!std::isfinite(t)) throw invalid_parameters("non-finite margin parameter");
    switch (fam) {
    case Family::exponential:
        if (theta[0] <= 0.0) throw invalid_parameters("exponential rate must be > 0");
        break;
    case Family::lomax:
        if (theta[0] <= 0.0 || theta[1] <= 0.0)
            throw invalid_parameters("lomax tail and scale must be > 0");
        break;
    case Family::normal:
        if (theta[1] <= 0.0) throw invalid_parameters("normal sd must be > 0");
        break;
    }
}

bool in_support(Family fam, double x) {
    switch (fam) {
    case Family::exponential: return x >= 0.0;
    case Family::lomax: return x >= 0.0;
    case Family::normal: return std::isfinite(x);
    }
    return false;
}

double cdf(Family fam, const std::vector<double>& theta, double x) {
    validate(fam, theta);
    switch (fam) {
    case Family::exponential:
        return x <= 0.0 ? 0.0 : -std::expm1(-theta[0] * x);
    case Family::lomax:
        return x <= 0.0 ? 0.0 : -std::expm1(-theta[0] * std::log1p(x / theta[1]));
    case Family::normal:
        return norm_cdf((x - theta[0]) / theta[1]);
    }
    return 0.0;
}

double quantile(Family fam, const std::vector<double>& theta, double u) {
    validate(fam, theta);
    if (!(u > 0.0 && u < 1.0)) throw domain_error("margin quantile: u must lie in (0,1)");
    switch (fam) {
    case Family::exponential:
        return -std::log1p(-u) / theta[0];
    case Family::lomax:
        return theta[1] * std::expm1(-std::log1p(-u) / theta[0]);
    case Family::normal:
        return theta[0] + theta[1] * norm_quantile(u);
    }
    return 0.0;
}

double log_pdf(Family fam, const std::vector<double>& theta, double x) {
    validate(fam, theta);
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    switch (fam) {
    case Family::exponential:
        return x < 0.0 ? neg_inf : std::log(theta[0]) - theta[0] * x;
    case Family::lomax:
        return x < 0.0 ? neg_inf
                       : std::log(theta[0]) - std::log(theta[1]) -
                             (theta[0] + 1.0) * std::log1p(x / theta[1]);
    case Family::normal: {
        const double z = (x - theta[0]) / theta[1];
        return -std::log(theta[1]) - 0.5 * z * z - 0.9189385332046727; // log sqrt(2 pi)
    }
    }
    return neg_inf;
}

Eigen::VectorXd cdf_param_grad(Family fam, const std::vector<double>& theta, double x) {
    validate(fam, theta);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(param_dim(fam));
    switch (fam) {
    case Family::exponential:
        if (x > 0.0) g[0] = x * std::exp(-theta[0] * x);
        break;
    case Family::lomax:
        if (x > 0.0) {
            const double L = std::log1p(x / theta[1]);
            g[0] = std::exp(-theta[0] * L) * L;
            g[1] = -(theta[0] * x / (theta[1] * theta[1])) * std::exp(-(theta[0] + 1.0) * L);
        }
        break;
    case Family::normal: {
        const double z = (x - theta[0]) / theta[1];
        const double phi = norm_pdf(z);
        g[0] = -phi / theta[1];
        g[1] = -z * phi / theta[1];
        break;
    }
    }
    return g;
}

ScoreAtQuantile score_at_quantile(Family fam, const std::vector<double>& theta, double u) {
    validate(fam, theta);
    if (!(u > u_guard && u < 1.0 - u_guard))
        throw domain_error("score_at_quantile: u outside the guarded interval");

    ScoreAtQuantile out;
    out.value.resize(param_dim(fam));
    out.du.resize(param_dim(fam));
    const double w = 1.0 - u;

    switch (fam) {
    case Family::exponential: {
        const double beta = theta[0];
        const double lw = std::log(w);
        out.value[0] = -w * lw / beta;
        out.du[0] = (lw + 1.0) / beta;
        break;
    }
    case Family::lomax: {
        const double alpha = theta[0], sigma = theta[1];
        const double lw = std::log(w);
        // dF/dalpha at Q(u) = -(1-u) log(1-u) / alpha
        out.value[0] = -w * lw / alpha;
        out.du[0] = (lw + 1.0) / alpha;
        // dF/dsigma at Q(u) = -(alpha/sigma) [(1-u) - (1-u)^{1+1/alpha}]
        const double wp = std::pow(w, 1.0 + 1.0 / alpha);
        out.value[1] = -(alpha / sigma) * (w - wp);
        out.du[1] = (alpha / sigma) * (1.0 - (1.0 + 1.0 / alpha) * std::pow(w, 1.0 / alpha));
        break;
    }
    case Family::normal: {
        const double sigma = theta[1];
        const double z = norm_quantile(u);
        const double phi = norm_pdf(z);
        out.value[0] = -phi / sigma;
        out.value[1] = -z * phi / sigma;
        out.du[0] = z / sigma;
        out.du[1] = (z * z - 1.0) / sigma;
        break;
    }
    }
    if (!out.value.allFinite() || !out.du.allFinite())
        throw numerical_singularity("margin score diverged at u=" + std::to_string(u));
    return out;
}

Eigen::VectorXd logpdf_param_grad(Family fam, const std::vector<double>& theta, double x) {
    validate(fam, theta);
    Eigen::VectorXd g(param_dim(fam));
    switch (fam) {
    case Family::exponential:
        g[0] = 1.0 / theta[0] - x;
        break;
    case Family::lomax: {
        const double alpha = theta[0], sigma = theta[1];
        const double L = std::log1p(x / sigma);
        g[0] = 1.0 / alpha - L;
        g[1] = -1.0 / sigma + (alpha + 1.0) * x / (sigma * (sigma + x));
        break;
    }
    case Family::normal: {
        const double z = (x - theta[0]) / theta[1];
        g[0] = z / theta[1];
        g[1] = (z * z - 1.0) / theta[1];
        break;
    }
    }
    return g;
}

double loglik(Family fam, const std::vector<double>& theta, std::span<const double> data) {
    double ll = 0.0;
    for (double x : data) ll += log_pdf(fam, theta, x);
    return ll;
}

Eigen::VectorXd loglik_grad(Family fam, const std::vector<double>& theta,
                            std::span<const double> data) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(param_dim(fam));
    for (double x : data) g += logpdf_param_grad(fam, theta, x);
    return g;
}

std::vector<double> moment_init(Family fam, std::span<const double> data) {
    const double m = sample_mean(data);
    double ss = 0.0;
    for (double x : data) ss += (x - m) * (x - m);
    const double var = ss / static_cast<double>(data.size());
    switch (fam) {
    case Family::exponential:
        return {m > 0.0 ? 1.0 / m : 1.0};
    case Family::lomax: {
        // mean = sigma/(alpha-1), var/mean^2 = alpha/(alpha-2) for alpha > 2
        double alpha = 2.5;
        if (m > 0.0 && var > m * m) {
            const double r = var / (m * m);
            alpha = 2.0 * r / (r - 1.0);
        }
        alpha = std::clamp(alpha, 0.1, 50.0);
        const double sigma = std::max(m * (alpha - 1.0), 1e-3);
        return {alpha, sigma};
    }
    case Family::normal:
        return {m, std::max(std::sqrt(var), 1e-12)};
    }
    return {};
}

FitResult fit_mle(Family fam, std::span<const double> data) {
    const auto n = static_cast<double>(data.size());
    if (data.size() < static_cast<std::size_t>(param_dim(fam)) + 1)
        throw invalid_parameters("margin fit needs at least m+1 observations");
    for (double x : data)
        if (!in_support(fam, x))
            throw support_violation("observation outside the support of " + to_string(fam));

    FitResult out;
    switch (fam) {
    case Family::exponential: {
        const double m = sample_mean(data);
        if (m <= 0.0) throw degenerate_data("exponential fit: non-positive sample mean");
        out.theta = {1.0 / m};
        out.converged = true;
        break;
    }
    case Family::normal: {
        const double m = sample_mean(data);
        double ss = 0.0;
        for (double x : data) ss += (x - m) * (x - m);
        const double sd = std::sqrt(ss / n);
        if (sd <= 0.0) throw degenerate_data("normal fit: constant column");
        out.theta = {m, sd};
        out.converged = true;
        break;
    }
    case Family::lomax: {
        const auto init = moment_init(Family::lomax, data);
        Eigen::VectorXd x0(2);
        x0 << std::log(init[0]), std::log(init[1]);
        // Minimize mean negative log-likelihood over (log alpha, log sigma).
        auto objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd& grad) -> double {
            const std::vector<double> th{std::exp(z[0]), std::exp(z[1])};
            const double nll = -loglik(Family::lomax, th, data) / n;
            const Eigen::VectorXd g = loglik_grad(Family::lomax, th, data) / n;
            grad.resize(2);
            grad[0] = -g[0] * th[0];
            grad[1] = -g[1] * th[1];
            return nll;
        };
        OptimOptions opts;
        opts.max_iterations = 200;
        opts.grad_tol = 1e-8;
        const OptimResult r = minimize_bfgs(objective, x0, opts);
        if (!r.converged)
            throw non_convergence("lomax fit did not converge in " +
                                  std::to_string(r.iterations) + " iterations");
        out.theta = {std::exp(r.x[0]), std::exp(r.x[1])};
        out.iterations = r.iterations;
        out.converged = true;
        break;
    }
    }
    out.loglik = loglik(fam, out.theta, data);
    out.grad_sup_norm = loglik_grad(fam, out.theta, data).lpNorm<Eigen::Infinity>();
    if (fam != Family::lomax) out.converged = true;
    return out;
}

} // namespace copgof::margins
