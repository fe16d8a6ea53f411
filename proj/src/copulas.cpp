#include "copgof/copulas.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "copgof/errors.hpp"
#include "copgof/quadrature.hpp"
#include "copgof/rng.hpp"

namespace copgof::copulas {

namespace {

constexpr double frank_series_cutoff = 1e-6;

void require_interior(std::span<const double> u) {
    for (double x : u)
        if (!(x > 0.0 && x < 1.0)) throw domain_error("copula point must be interior to (0,1)^d");
}

void require_unit_cube(std::span<const double> u) {
    for (double x : u)
        if (!(x >= 0.0 && x <= 1.0)) throw domain_error("copula point must lie in [0,1]^d");
}

void require_dim(Family fam, int d) {
    if (!supports_dim(fam, d))
        throw invalid_parameters(to_string(fam) + " copula does not support dimension " +
                                 std::to_string(d));
}

// ---------------------------------------------------------------------------
// Clayton, general d. T(u) = sum u_j^{-lambda} - (d-1).
// ---------------------------------------------------------------------------

struct ClaytonParts {
    double T = 0.0;
    std::vector<double> t; // u_j^{-lambda}
};

ClaytonParts clayton_parts(double lambda, std::span<const double> u) {
    ClaytonParts p;
    p.t.resize(u.size());
    p.T = 1.0 - static_cast<double>(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) {
        const double e = -lambda * std::log(u[j]);
        if (e > 700.0) throw numerical_singularity("clayton: u^{-lambda} overflows");
        p.t[j] = std::exp(e);
        p.T += p.t[j];
    }
    return p;
}

double clayton_cdf(double lambda, std::span<const double> u) {
    for (double x : u)
        if (x == 0.0) return 0.0;
    const auto p = clayton_parts(lambda, u);
    return std::exp(-std::log(p.T) / lambda);
}

double clayton_log_density(double lambda, std::span<const double> u) {
    const int d = static_cast<int>(u.size());
    const auto p = clayton_parts(lambda, u);
    double lc = 0.0;
    for (int k = 1; k < d; ++k) lc += std::log(1.0 + k * lambda);
    for (double x : u) lc -= (lambda + 1.0) * std::log(x);
    lc -= (1.0 / lambda + d) * std::log(p.T);
    return lc;
}

LogDensityGrads clayton_grads(double lambda, std::span<const double> u) {
    const int d = static_cast<int>(u.size());
    const auto p = clayton_parts(lambda, u);
    LogDensityGrads g;
    g.grad_u.resize(d);
    g.grad_lambda.resize(1);
    for (int j = 0; j < d; ++j)
        g.grad_u[j] = (-(lambda + 1.0) + (1.0 + d * lambda) * p.t[j] / p.T) / u[j];
    double sum_k = 0.0;
    for (int k = 1; k < d; ++k) sum_k += k / (1.0 + k * lambda);
    double sum_lu = 0.0, sum_tlu = 0.0;
    for (int j = 0; j < d; ++j) {
        const double lu = std::log(u[j]);
        sum_lu += lu;
        sum_tlu += p.t[j] * lu;
    }
    g.grad_lambda[0] = sum_k - sum_lu + std::log(p.T) / (lambda * lambda) +
                       (1.0 / lambda + d) * sum_tlu / p.T;
    return g;
}

double clayton_partial(double lambda, std::span<const double> u, int j) {
    const auto p = clayton_parts(lambda, u);
    const double C = std::exp(-std::log(p.T) / lambda);
    return C * (p.t[static_cast<std::size_t>(j)] / p.T) / u[static_cast<std::size_t>(j)];
}

double clayton_cdf_lambda_grad(double lambda, std::span<const double> u) {
    const auto p = clayton_parts(lambda, u);
    const double C = std::exp(-std::log(p.T) / lambda);
    double sum_tlu = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) sum_tlu += p.t[j] * std::log(u[j]);
    return C * (std::log(p.T) / (lambda * lambda) + sum_tlu / (lambda * p.T));
}

// ---------------------------------------------------------------------------
// Gumbel, general d. With x_j = -log u_j, A = sum x_j^lambda, s = A^{1/lambda}
// and alpha = 1/lambda, the d-th generator derivative gives
//   c(u) = exp(-s) A^{-d} Q_d(s) lambda^d prod_j x_j^{lambda-1}/u_j,
// where Q_d(s) = sum_k a_{d,k}(alpha) s^k with
//   a_{1,1} = alpha,  a_{D+1,k} = alpha a_{D,k-1} + (D - alpha k) a_{D,k}.
// All coefficients are nonnegative for alpha in (0,1], so Q_d(s) > 0.
// ---------------------------------------------------------------------------

struct GumbelPoly {
    std::vector<double> a; // a[k], k = 1..d (index 0 unused)
    std::vector<double> b; // da/dalpha
};

GumbelPoly gumbel_poly(int d, double alpha) {
    GumbelPoly P;
    P.a.assign(static_cast<std::size_t>(d) + 1, 0.0);
    P.b.assign(static_cast<std::size_t>(d) + 1, 0.0);
    P.a[1] = alpha;
    P.b[1] = 1.0;
    std::vector<double> na(P.a.size()), nb(P.b.size());
    for (int D = 1; D < d; ++D) {
        std::fill(na.begin(), na.end(), 0.0);
        std::fill(nb.begin(), nb.end(), 0.0);
        for (int k = 1; k <= D + 1; ++k) {
            const double a_prev = (k >= 2) ? P.a[static_cast<std::size_t>(k) - 1] : 0.0;
            const double b_prev = (k >= 2) ? P.b[static_cast<std::size_t>(k) - 1] : 0.0;
            const double a_k = (k <= D) ? P.a[static_cast<std::size_t>(k)] : 0.0;
            const double b_k = (k <= D) ? P.b[static_cast<std::size_t>(k)] : 0.0;
            na[static_cast<std::size_t>(k)] = alpha * a_prev + (D - alpha * k) * a_k;
            nb[static_cast<std::size_t>(k)] = a_prev + alpha * b_prev + (D - alpha * k) * b_k - k * a_k;
        }
        P.a = na;
        P.b = nb;
    }
    return P;
}

struct GumbelParts {
    std::vector<double> lx; // log x_j
    std::vector<double> r;  // x_j^lambda / A
    double lA = 0.0;        // log A
    double s = 0.0;         // A^{1/lambda}
};

GumbelParts gumbel_parts(double lambda, std::span<const double> u) {
    GumbelParts p;
    const std::size_t d = u.size();
    p.lx.resize(d);
    p.r.resize(d);
    double max_e = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d; ++j) {
        p.lx[j] = std::log(-std::log(u[j]));
        max_e = std::max(max_e, lambda * p.lx[j]);
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += std::exp(lambda * p.lx[j] - max_e);
    p.lA = max_e + std::log(acc);
    for (std::size_t j = 0; j < d; ++j) p.r[j] = std::exp(lambda * p.lx[j] - p.lA);
    p.s = std::exp(p.lA / lambda);
    return p;
}

double gumbel_cdf(double lambda, std::span<const double> u) {
    for (double x : u)
        if (x == 0.0) return 0.0;
    bool all_one = true;
    for (double x : u)
        if (x != 1.0) all_one = false;
    if (all_one) return 1.0;
    // x_j = 0 for coordinates equal to 1 drops them from A
    std::vector<double> act;
    for (double x : u)
        if (x < 1.0) act.push_back(x);
    const auto p = gumbel_parts(lambda, act);
    return std::exp(-p.s);
}

double gumbel_log_density(double lambda, std::span<const double> u) {
    const int d = static_cast<int>(u.size());
    const auto p = gumbel_parts(lambda, u);
    const auto P = gumbel_poly(d, 1.0 / lambda);
    double Q = 0.0;
    for (int k = d; k >= 1; --k) Q = Q * p.s + P.a[static_cast<std::size_t>(k)];
    Q *= p.s; // sum a_k s^k
    double lc = -p.s - d * p.lA + std::log(Q) + d * std::log(lambda);
    for (std::size_t j = 0; j < u.size(); ++j)
        lc += (lambda - 1.0) * p.lx[j] - std::log(u[j]);
    return lc;
}

LogDensityGrads gumbel_grads(double lambda, std::span<const double> u) {
    const int d = static_cast<int>(u.size());
    const double alpha = 1.0 / lambda;
    const auto p = gumbel_parts(lambda, u);
    const auto P = gumbel_poly(d, alpha);

    double Q = 0.0, Qp = 0.0, Qa = 0.0;
    for (int k = d; k >= 1; --k) {
        Q = Q * p.s + P.a[static_cast<std::size_t>(k)];
        Qa = Qa * p.s + P.b[static_cast<std::size_t>(k)];
        Qp = Qp * p.s + k * P.a[static_cast<std::size_t>(k)];
    }
    Q *= p.s;       // Q(s)
    Qa *= p.s;      // dQ/dalpha at fixed s
    // Qp = sum k a_k s^{k-1}

    LogDensityGrads g;
    g.grad_u.resize(d);
    g.grad_lambda.resize(1);

    for (int j = 0; j < d; ++j) {
        const std::size_t js = static_cast<std::size_t>(j);
        const double x_j = std::exp(p.lx[js]);
        const double AjA = -lambda * p.r[js] / (x_j * u[js]); // (dA/du_j)/A
        const double s_u = p.s * AjA / lambda;
        g.grad_u[j] = s_u * (Qp / Q - 1.0) - d * AjA - ((lambda - 1.0) / x_j + 1.0) / u[js];
    }

    double AdotA = 0.0, sum_lx = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        AdotA += p.r[j] * p.lx[j];
        sum_lx += p.lx[j];
    }
    const double ds = p.s * (-p.lA / (lambda * lambda) + AdotA / lambda);
    const double dlnQ = (Qp * ds - Qa / (lambda * lambda)) / Q;
    g.grad_lambda[0] = -ds - d * AdotA + dlnQ + d / lambda + sum_lx;
    return g;
}

double gumbel_partial(double lambda, std::span<const double> u, int j) {
    const auto p = gumbel_parts(lambda, u);
    const std::size_t js = static_cast<std::size_t>(j);
    const double x_j = std::exp(p.lx[js]);
    // dC/du_j = C s^{1-lambda} x_j^{lambda-1} / u_j = C (s/x_j) r_j / u_j
    return std::exp(-p.s) * (p.s / x_j) * p.r[js] / u[js];
}

double gumbel_cdf_lambda_grad(double lambda, std::span<const double> u) {
    const auto p = gumbel_parts(lambda, u);
    double AdotA = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) AdotA += p.r[j] * p.lx[j];
    const double ds = p.s * (-p.lA / (lambda * lambda) + AdotA / lambda);
    return -std::exp(-p.s) * ds;
}

// ---------------------------------------------------------------------------
// Frank, bivariate. C = -log(1 + g(u)g(v)/D)/lambda with g(x) = e^{-lambda x}-1
// and D = e^{-lambda}-1. Near lambda = 0 the formula has a removable
// singularity; |lambda| < 1e-6 switches to the first-order expansion around
// the independence copula.
// ---------------------------------------------------------------------------

double frank_cdf(double lambda, std::span<const double> u) {
    const double x = u[0], y = u[1];
    if (std::fabs(lambda) < frank_series_cutoff)
        return x * y * (1.0 + 0.5 * lambda * (1.0 - x) * (1.0 - y));
    const double gu = std::expm1(-lambda * x), gv = std::expm1(-lambda * y);
    const double D = std::expm1(-lambda);
    return -std::log1p(gu * gv / D) / lambda;
}

double frank_log_density(double lambda, std::span<const double> u) {
    const double x = u[0], y = u[1];
    if (std::fabs(lambda) < frank_series_cutoff)
        return std::log1p(0.5 * lambda * (1.0 - 2.0 * x) * (1.0 - 2.0 * y));
    const double gu = std::expm1(-lambda * x), gv = std::expm1(-lambda * y);
    const double D = std::expm1(-lambda);
    const double M = D + gu * gv;
    const double num = -lambda * D; // positive for all lambda != 0
    return std::log(num) - lambda * (x + y) - 2.0 * std::log(std::fabs(M));
}

LogDensityGrads frank_grads(double lambda, std::span<const double> u) {
    const double x = u[0], y = u[1];
    LogDensityGrads g;
    g.grad_u.resize(2);
    g.grad_lambda.resize(1);
    if (std::fabs(lambda) < frank_series_cutoff) {
        const double den = 1.0 + 0.5 * lambda * (1.0 - 2.0 * x) * (1.0 - 2.0 * y);
        g.grad_u[0] = -lambda * (1.0 - 2.0 * y) / den;
        g.grad_u[1] = -lambda * (1.0 - 2.0 * x) / den;
        g.grad_lambda[0] = 0.5 * (1.0 - 2.0 * x) * (1.0 - 2.0 * y) / den;
        return g;
    }
    const double eu = std::exp(-lambda * x), ev = std::exp(-lambda * y);
    const double gu = eu - 1.0, gv = ev - 1.0;
    const double el = std::exp(-lambda);
    const double D = el - 1.0;
    const double M = D + gu * gv;
    g.grad_u[0] = -lambda + 2.0 * lambda * eu * gv / M;
    g.grad_u[1] = -lambda + 2.0 * lambda * ev * gu / M;
    const double dM = -el - x * eu * gv - y * ev * gu;
    g.grad_lambda[0] = (1.0 / lambda + el / (1.0 - el)) - (x + y) - 2.0 * dM / M;
    return g;
}

double frank_partial(double lambda, std::span<const double> u, int j) {
    const double x = u[j], y = u[1 - j];
    if (std::fabs(lambda) < frank_series_cutoff)
        return y * (1.0 + 0.5 * lambda * (1.0 - y) * (1.0 - 2.0 * x));
    const double gu = std::expm1(-lambda * x), gv = std::expm1(-lambda * y);
    const double D = std::expm1(-lambda);
    return std::exp(-lambda * x) * gv / (D + gu * gv);
}

double frank_cdf_lambda_grad(double lambda, std::span<const double> u) {
    const double x = u[0], y = u[1];
    if (std::fabs(lambda) < frank_series_cutoff)
        return 0.5 * x * y * (1.0 - x) * (1.0 - y);
    const double gu = std::expm1(-lambda * x), gv = std::expm1(-lambda * y);
    const double el = std::exp(-lambda);
    const double D = el - 1.0;
    const double w = 1.0 + gu * gv / D;
    const double dgg = -x * std::exp(-lambda * x) * gv - y * std::exp(-lambda * y) * gu;
    const double dw = dgg / D + gu * gv * el / (D * D);
    return std::log(w) / (lambda * lambda) - dw / (lambda * w);
}

// ---------------------------------------------------------------------------
// Cook-Johnson two-parameter Clayton extension, bivariate. A signed mix of
// four Clayton-like terms G_ab = (a u^{-l1} + b v^{-l1} - (a+b-1))^{-1/l1}
// with weights (1+l2, l2, -l2, -l2) for (a,b) = (1,1),(2,2),(2,1),(1,2).
// ---------------------------------------------------------------------------

struct CJTerm {
    double a, b, weight;
};

std::array<CJTerm, 4> cj_terms(double l2) {
    return {{{1, 1, 1.0 + l2}, {2, 2, l2}, {2, 1, -l2}, {1, 2, -l2}}};
}

double cj_T(double l1, double a, double b, double u, double v) {
    return a * std::exp(-l1 * std::log(u)) + b * std::exp(-l1 * std::log(v)) - (a + b - 1.0);
}

double cj_cdf(double lambda1, double lambda2, std::span<const double> uu) {
    const double u = uu[0], v = uu[1];
    if (u == 0.0 || v == 0.0) return 0.0;
    double C = 0.0;
    for (const auto& t : cj_terms(lambda2)) {
        if (t.weight == 0.0) continue;
        C += t.weight * std::exp(-std::log(cj_T(lambda1, t.a, t.b, u, v)) / lambda1);
    }
    return C;
}

struct CJDensityParts {
    double c = 0.0;        // density
    double dc_du = 0.0;    // dc/du
    double dc_dv = 0.0;    // dc/dv
    double dc_dl1 = 0.0;   // dc/dlambda1
    double dc_dl2 = 0.0;   // dc/dlambda2
};

CJDensityParts cj_density_parts(double l1, double l2, double u, double v) {
    CJDensityParts out;
    const double lu = std::log(u), lv = std::log(v);
    const double pu = std::exp(-l1 * lu), pv = std::exp(-l1 * lv); // u^{-l1}, v^{-l1}
    for (const auto& t : cj_terms(l2)) {
        const double T = t.a * pu + t.b * pv - (t.a + t.b - 1.0);
        const double m = t.a * t.b * (1.0 + l1) * std::exp(-(l1 + 1.0) * (lu + lv)) *
                         std::exp(-(1.0 / l1 + 2.0) * std::log(T));
        const double dlogm_du = -(l1 + 1.0) / u + (1.0 / l1 + 2.0) * t.a * l1 * pu / (u * T);
        const double dlogm_dv = -(l1 + 1.0) / v + (1.0 / l1 + 2.0) * t.b * l1 * pv / (v * T);
        const double dlogm_dl1 = 1.0 / (1.0 + l1) - (lu + lv) + std::log(T) / (l1 * l1) +
                                 (1.0 / l1 + 2.0) * (t.a * pu * lu + t.b * pv * lv) / T;
        out.c += t.weight * m;
        out.dc_du += t.weight * m * dlogm_du;
        out.dc_dv += t.weight * m * dlogm_dv;
        out.dc_dl1 += t.weight * m * dlogm_dl1;
        // dweight/dl2 = +1 for (1,1) and (2,2), -1 for the cross terms
        const double dw = (t.weight >= 0.0 && t.a == t.b) ? 1.0 : -1.0;
        out.dc_dl2 += dw * m;
    }
    return out;
}

double cj_partial(double l1, double l2, std::span<const double> uu, int j) {
    const double u = uu[static_cast<std::size_t>(j)], v = uu[static_cast<std::size_t>(1 - j)];
    double out = 0.0;
    for (const auto& t : cj_terms(l2)) {
        // orient (a,b) so that `a` multiplies the differentiated coordinate
        const double a = (j == 0) ? t.a : t.b;
        const double b = (j == 0) ? t.b : t.a;
        const double T = a * std::exp(-l1 * std::log(u)) + b * std::exp(-l1 * std::log(v)) -
                         (a + b - 1.0);
        out += t.weight * a * std::exp(-(l1 + 1.0) * std::log(u)) *
               std::exp(-(1.0 / l1 + 1.0) * std::log(T));
    }
    return out;
}

Eigen::VectorXd cj_cdf_lambda_grad(double l1, double l2, std::span<const double> uu) {
    const double u = uu[0], v = uu[1];
    Eigen::VectorXd g(2);
    double d1 = 0.0, d2 = 0.0;
    for (const auto& t : cj_terms(l2)) {
        const double T = cj_T(l1, t.a, t.b, u, v);
        const double G = std::exp(-std::log(T) / l1);
        const double pu = std::exp(-l1 * std::log(u)), pv = std::exp(-l1 * std::log(v));
        const double Gdot =
            G * (std::log(T) / (l1 * l1) +
                 (t.a * pu * std::log(u) + t.b * pv * std::log(v)) / (l1 * T));
        d1 += t.weight * Gdot;
        const double dw = (t.weight >= 0.0 && t.a == t.b) ? 1.0 : -1.0;
        d2 += dw * G;
    }
    g << d1, d2;
    return g;
}

// ---------------------------------------------------------------------------
// Dependence measures
// ---------------------------------------------------------------------------

double debye(int order, double lambda) {
    // D_k(x) = (k/x^k) int_0^x t^k/(e^t - 1) dt, valid for negative x as well.
    const GaussLegendre gl(64, 0.0, lambda);
    double acc = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double t = gl.nodes[i];
        const double f = (std::fabs(t) < 1e-12) ? 1.0 : t / std::expm1(t);
        acc += gl.weights[i] * std::pow(t, order - 1) * f;
    }
    return order * acc / std::pow(lambda, order);
}

double tau_by_quadrature(Family fam, const std::vector<double>& lambda) {
    // tau = 1 - 4 int int dC/du dC/dv du dv (bounded integrand)
    const GaussLegendre gl(128, 0.0, 1.0);
    double acc = 0.0;
    std::array<double, 2> pt{};
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
            pt[0] = gl.nodes[i];
            pt[1] = gl.nodes[j];
            acc += gl.weights[i] * gl.weights[j] * partial_u(fam, lambda, pt, 0) *
                   partial_u(fam, lambda, pt, 1);
        }
    }
    return 1.0 - 4.0 * acc;
}

double rho_by_quadrature(Family fam, const std::vector<double>& lambda) {
    const GaussLegendre gl(128, 0.0, 1.0);
    double acc = 0.0;
    std::array<double, 2> pt{};
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
            pt[0] = gl.nodes[i];
            pt[1] = gl.nodes[j];
            acc += gl.weights[i] * gl.weights[j] * cdf(fam, lambda, pt);
        }
    }
    return 12.0 * acc - 3.0;
}

} // namespace

Family family_from_string(const std::string& name) {
    if (name == "independence" || name == "indep") return Family::independence;
    if (name == "clayton") return Family::clayton;
    if (name == "gumbel") return Family::gumbel;
    if (name == "frank") return Family::frank;
    if (name == "cook-johnson" || name == "cook_johnson" || name == "cj")
        return Family::cook_johnson;
    throw invalid_parameters("unknown copula family: " + name);
}

std::string to_string(Family fam) {
    switch (fam) {
    case Family::independence: return "independence";
    case Family::clayton: return "clayton";
    case Family::gumbel: return "gumbel";
    case Family::frank: return "frank";
    case Family::cook_johnson: return "cook-johnson";
    }
    return "?";
}

int param_dim(Family fam) {
    switch (fam) {
    case Family::independence: return 0;
    case Family::clayton:
    case Family::gumbel:
    case Family::frank: return 1;
    case Family::cook_johnson: return 2;
    }
    return 0;
}

bool supports_dim(Family fam, int d) {
    if (d < 2) return false;
    if (fam == Family::frank || fam == Family::cook_johnson) return d == 2;
    return true;
}

void validate(Family fam, const std::vector<double>& lambda) {
    if (static_cast<int>(lambda.size()) != param_dim(fam))
        throw invalid_parameters("copula parameter vector has wrong length for " + to_string(fam));
    for (double l : lambda)
        if (!std::isfinite(l)) throw invalid_parameters("non-finite copula parameter");
    switch (fam) {
    case Family::independence: break;
    case Family::clayton:
        if (lambda[0] <= 0.0) throw invalid_parameters("clayton lambda must be > 0");
        break;
    case Family::gumbel:
        if (lambda[0] <= 1.0) throw invalid_parameters("gumbel lambda must be > 1");
        break;
    case Family::frank: break;
    case Family::cook_johnson:
        if (lambda[0] <= 0.0) throw invalid_parameters("cook-johnson lambda1 must be > 0");
        if (lambda[1] < 0.0 || lambda[1] > 1.0)
            throw invalid_parameters("cook-johnson lambda2 must lie in [0,1]");
        break;
    }
}

double cdf(Family fam, const std::vector<double>& lambda, std::span<const double> u) {
    validate(fam, lambda);
    require_dim(fam, static_cast<int>(u.size()));
    require_unit_cube(u);
    switch (fam) {
    case Family::independence: {
        double p = 1.0;
        for (double x : u) p *= x;
        return p;
    }
    case Family::clayton: return clayton_cdf(lambda[0], u);
    case Family::gumbel: return gumbel_cdf(lambda[0], u);
    case Family::frank: return frank_cdf(lambda[0], u);
    case Family::cook_johnson: return cj_cdf(lambda[0], lambda[1], u);
    }
    return 0.0;
}

double log_density(Family fam, const std::vector<double>& lambda, std::span<const double> u) {
    validate(fam, lambda);
    require_dim(fam, static_cast<int>(u.size()));
    require_interior(u);
    double lc = 0.0;
    switch (fam) {
    case Family::independence: lc = 0.0; break;
    case Family::clayton: lc = clayton_log_density(lambda[0], u); break;
    case Family::gumbel: lc = gumbel_log_density(lambda[0], u); break;
    case Family::frank: lc = frank_log_density(lambda[0], u); break;
    case Family::cook_johnson: {
        const auto parts = cj_density_parts(lambda[0], lambda[1], u[0], u[1]);
        if (!(parts.c > 0.0))
            throw numerical_singularity("cook-johnson density not positive at evaluation point");
        lc = std::log(parts.c);
        break;
    }
    }
    if (!std::isfinite(lc))
        throw numerical_singularity("copula log-density not finite at evaluation point");
    return lc;
}

double density(Family fam, const std::vector<double>& lambda, std::span<const double> u) {
    return std::exp(log_density(fam, lambda, u));
}

LogDensityGrads log_density_grads(Family fam, const std::vector<double>& lambda,
                                  std::span<const double> u) {
    validate(fam, lambda);
    require_dim(fam, static_cast<int>(u.size()));
    require_interior(u);
    LogDensityGrads g;
    switch (fam) {
    case Family::independence:
        g.grad_u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(u.size()));
        g.grad_lambda.resize(0);
        break;
    case Family::clayton: g = clayton_grads(lambda[0], u); break;
    case Family::gumbel: g = gumbel_grads(lambda[0], u); break;
    case Family::frank: g = frank_grads(lambda[0], u); break;
    case Family::cook_johnson: {
        const auto p = cj_density_parts(lambda[0], lambda[1], u[0], u[1]);
        if (!(p.c > 0.0))
            throw numerical_singularity("cook-johnson density not positive at evaluation point");
        g.grad_u.resize(2);
        g.grad_lambda.resize(2);
        g.grad_u << p.dc_du / p.c, p.dc_dv / p.c;
        g.grad_lambda << p.dc_dl1 / p.c, p.dc_dl2 / p.c;
        break;
    }
    }
    if (!g.grad_u.allFinite() || !g.grad_lambda.allFinite())
        throw numerical_singularity("copula log-density gradient not finite");
    return g;
}

double partial_u(Family fam, const std::vector<double>& lambda, std::span<const double> u, int j) {
    validate(fam, lambda);
    require_dim(fam, static_cast<int>(u.size()));
    require_interior(u);
    if (j < 0 || j >= static_cast<int>(u.size())) throw domain_error("partial_u: bad axis index");
    switch (fam) {
    case Family::independence: {
        double p = 1.0;
        for (std::size_t k = 0; k < u.size(); ++k)
            if (static_cast<int>(k) != j) p *= u[k];
        return p;
    }
    case Family::clayton: return clayton_partial(lambda[0], u, j);
    case Family::gumbel: return gumbel_partial(lambda[0], u, j);
    case Family::frank: return frank_partial(lambda[0], u, j);
    case Family::cook_johnson: return cj_partial(lambda[0], lambda[1], u, j);
    }
    return 0.0;
}

Eigen::VectorXd cdf_lambda_grad(Family fam, const std::vector<double>& lambda,
                                std::span<const double> u) {
    validate(fam, lambda);
    require_dim(fam, static_cast<int>(u.size()));
    require_interior(u);
    switch (fam) {
    case Family::independence: return Eigen::VectorXd(0);
    case Family::clayton: {
        Eigen::VectorXd g(1);
        g[0] = clayton_cdf_lambda_grad(lambda[0], u);
        return g;
    }
    case Family::gumbel: {
        Eigen::VectorXd g(1);
        g[0] = gumbel_cdf_lambda_grad(lambda[0], u);
        return g;
    }
    case Family::frank: {
        Eigen::VectorXd g(1);
        g[0] = frank_cdf_lambda_grad(lambda[0], u);
        return g;
    }
    case Family::cook_johnson: return cj_cdf_lambda_grad(lambda[0], lambda[1], u);
    }
    return Eigen::VectorXd(0);
}

namespace {

double invert_conditional(Family fam, const std::vector<double>& lambda, double u, double w) {
    // Solve dC/du (u, v) = w for v; the conditional df is increasing in v.
    double lo = 1e-15, hi = 1.0 - 1e-15;
    std::array<double, 2> pt{u, 0.0};
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        pt[1] = mid;
        if (partial_u(fam, lambda, pt, 0) < w)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

Eigen::MatrixXd sample(Family fam, const std::vector<double>& lambda, int d, int n,
                       std::uint64_t seed) {
    validate(fam, lambda);
    require_dim(fam, d);
    Eigen::MatrixXd out(n, d);
    Rng rng(seed);

    if (fam == Family::independence) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) out(i, j) = rng.uniform();
        return out;
    }

    if (d == 2) {
        for (int i = 0; i < n; ++i) {
            const double u = rng.uniform();
            const double w = rng.uniform();
            out(i, 0) = u;
            out(i, 1) = invert_conditional(fam, lambda, u, w);
        }
        return out;
    }

    // d > 2: Archimedean frailty representations
    if (fam == Family::clayton) {
        const double l = lambda[0];
        for (int i = 0; i < n; ++i) {
            const double G = rng.gamma(1.0 / l);
            for (int j = 0; j < d; ++j)
                out(i, j) = std::exp(-std::log1p(rng.exponential() / G) / l);
        }
        return out;
    }
    if (fam == Family::gumbel) {
        const double l = lambda[0];
        const double alpha = 1.0 / l;
        for (int i = 0; i < n; ++i) {
            // Kanter's representation of the positive stable frailty with
            // Laplace transform exp(-t^alpha).
            const double theta = rng.uniform() * M_PI;
            const double W = rng.exponential();
            const double S = std::sin(alpha * theta) *
                             std::pow(std::sin((1.0 - alpha) * theta) / W, (1.0 - alpha) / alpha) /
                             std::pow(std::sin(theta), 1.0 / alpha);
            for (int j = 0; j < d; ++j)
                out(i, j) = std::exp(-std::pow(rng.exponential() / S, alpha));
        }
        return out;
    }
    throw invalid_parameters(to_string(fam) + " sampling is bivariate only");
}

double kendall_tau(Family fam, const std::vector<double>& lambda) {
    validate(fam, lambda);
    switch (fam) {
    case Family::independence: return 0.0;
    case Family::clayton: return lambda[0] / (lambda[0] + 2.0);
    case Family::gumbel: return 1.0 - 1.0 / lambda[0];
    case Family::frank:
        if (std::fabs(lambda[0]) < frank_series_cutoff) return lambda[0] / 9.0;
        return 1.0 - 4.0 / lambda[0] * (1.0 - debye(1, lambda[0]));
    case Family::cook_johnson: return tau_by_quadrature(fam, lambda);
    }
    return 0.0;
}

double spearman_rho(Family fam, const std::vector<double>& lambda) {
    validate(fam, lambda);
    switch (fam) {
    case Family::independence: return 0.0;
    case Family::frank:
        if (std::fabs(lambda[0]) < frank_series_cutoff) return lambda[0] / 6.0;
        return 1.0 - 12.0 / lambda[0] * (debye(1, lambda[0]) - debye(2, lambda[0]));
    default: return rho_by_quadrature(fam, lambda);
    }
}

} // namespace copgof::copulas
