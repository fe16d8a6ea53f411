#include "doctest.h"

#include <cmath>
#include <vector>

#include "copgof/errors.hpp"
#include "copgof/margins.hpp"
#include "copgof/math.hpp"
#include "copgof/rng.hpp"
#include "support/oracles.hpp"

using namespace copgof;
namespace mg = copgof::margins;

namespace {

const std::vector<mg::Family> all_families{mg::Family::exponential, mg::Family::lomax,
                                           mg::Family::normal};

std::vector<double> params_for(mg::Family fam) {
    switch (fam) {
    case mg::Family::exponential: return {1.3};
    case mg::Family::lomax: return {3.0, 1.0};
    case mg::Family::normal: return {0.4, 1.7};
    }
    return {};
}

} // namespace

TEST_CASE("cdf closed-form values") {
    CHECK(mg::cdf(mg::Family::lomax, {3.0, 1.0}, 1.0) == doctest::Approx(0.875).epsilon(1e-12));
    CHECK(mg::cdf(mg::Family::exponential, {1.0}, 0.0) == 0.0);
    CHECK(mg::cdf(mg::Family::normal, {0.0, 1.0}, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("quantile closed-form values") {
    CHECK(mg::quantile(mg::Family::exponential, {1.0}, 1.0 - std::exp(-1.0)) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mg::quantile(mg::Family::lomax, {3.0, 1.0}, 0.875) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mg::quantile(mg::Family::normal, {0.0, 1.0}, 0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS((void)mg::quantile(mg::Family::normal, {0.0, 1.0}, 0.0), domain_error);
    CHECK_THROWS_AS((void)mg::quantile(mg::Family::normal, {0.0, 1.0}, 1.0), domain_error);
}

TEST_CASE("quantile/cdf round trip on 99 interior points") {
    for (auto fam : all_families) {
        const auto theta = params_for(fam);
        for (int i = 1; i <= 99; ++i) {
            const double u = i / 100.0;
            const double x = mg::quantile(fam, theta, u);
            CHECK(std::fabs(mg::cdf(fam, theta, x) - u) < 1e-10);
        }
    }
}

TEST_CASE("parameter score values and finite differences") {
    CHECK(mg::cdf_param_grad(mg::Family::exponential, {1.0}, 1.0)[0] ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(mg::cdf_param_grad(mg::Family::normal, {0.0, 1.0}, 0.0)[0] ==
          doctest::Approx(-norm_pdf(0.0)).epsilon(1e-12));

    // below the support: cdf is constant zero there
    CHECK(mg::cdf_param_grad(mg::Family::exponential, {1.0}, -0.5).norm() == 0.0);
    CHECK(mg::cdf_param_grad(mg::Family::lomax, {3.0, 1.0}, -0.5).norm() == 0.0);

    Rng rng(42);
    for (auto fam : all_families) {
        const auto theta = params_for(fam);
        for (int rep = 0; rep < 100; ++rep) {
            const double u = rng.uniform(0.02, 0.98);
            const double x = mg::quantile(fam, theta, u);
            const auto grad = mg::cdf_param_grad(fam, theta, x);
            for (int i = 0; i < mg::param_dim(fam); ++i) {
                auto f = [&](double t) {
                    auto th = theta;
                    th[static_cast<std::size_t>(i)] = t;
                    return mg::cdf(fam, th, x);
                };
                const double fd =
                    oracles::central_diff(f, theta[static_cast<std::size_t>(i)], 1e-5);
                CHECK(oracles::rel_err(grad[i], fd) < 1e-6);
            }
        }
    }
}

TEST_CASE("score at quantile: closed forms and u-derivative") {
    const double u0 = 1.0 - std::exp(-1.0);
    CHECK(mg::score_at_quantile(mg::Family::exponential, {1.0}, u0).value[0] ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-10));

    // limit toward u = 0: -(1-u)log(1-u)/beta -> 0
    CHECK(std::fabs(mg::score_at_quantile(mg::Family::exponential, {1.0}, 1e-10).value[0]) <
          1e-8);

    // the guarded boundary raises
    CHECK_THROWS_AS((void)mg::score_at_quantile(mg::Family::exponential, {1.0}, 0.0),
                    domain_error);
    CHECK_THROWS_AS((void)mg::score_at_quantile(mg::Family::exponential, {1.0}, 1.0),
                    domain_error);

    const auto sn = mg::score_at_quantile(mg::Family::normal, {0.0, 1.0}, 0.5);
    CHECK(sn.value[0] == doctest::Approx(-norm_pdf(0.0)).epsilon(1e-12));

    Rng rng(7);
    for (auto fam : all_families) {
        const auto theta = params_for(fam);
        for (int rep = 0; rep < 100; ++rep) {
            const double u = rng.uniform(0.02, 0.98);
            const auto sq = mg::score_at_quantile(fam, theta, u);
            // value == score(quantile(u))
            const auto direct = mg::cdf_param_grad(fam, theta, mg::quantile(fam, theta, u));
            for (int i = 0; i < mg::param_dim(fam); ++i)
                CHECK(oracles::rel_err(sq.value[i], direct[i]) < 1e-10);
            // du matches central differences of value(u)
            for (int i = 0; i < mg::param_dim(fam); ++i) {
                auto f = [&](double uu) {
                    return mg::score_at_quantile(fam, theta, uu).value[i];
                };
                const double fd = oracles::central_diff(f, u, 1e-5);
                CHECK(oracles::rel_err(sq.du[i], fd) < 1e-5);
            }
        }
    }
}

TEST_CASE("log-density parameter gradient matches finite differences") {
    Rng rng(11);
    for (auto fam : all_families) {
        const auto theta = params_for(fam);
        for (int rep = 0; rep < 50; ++rep) {
            const double x = mg::quantile(fam, theta, rng.uniform(0.05, 0.95));
            const auto grad = mg::logpdf_param_grad(fam, theta, x);
            for (int i = 0; i < mg::param_dim(fam); ++i) {
                auto f = [&](double t) {
                    auto th = theta;
                    th[static_cast<std::size_t>(i)] = t;
                    return mg::log_pdf(fam, th, x);
                };
                const double fd =
                    oracles::central_diff(f, theta[static_cast<std::size_t>(i)], 1e-6);
                CHECK(oracles::rel_err(grad[i], fd) < 1e-5);
            }
        }
    }
}

TEST_CASE("closed-form maximum likelihood fits") {
    const std::vector<double> xs{1.0, 3.0, 2.0, 2.0};
    const auto fe = mg::fit_mle(mg::Family::exponential, xs);
    CHECK(fe.theta[0] == doctest::Approx(0.5).epsilon(1e-12));

    const std::vector<double> ns{1.0, 2.0, 3.0, 4.0};
    const auto fn = mg::fit_mle(mg::Family::normal, ns);
    CHECK(fn.theta[0] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(fn.theta[1] == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));
}

TEST_CASE("lomax fit against grid-search oracle") {
    // sample by inverse cdf, fixed seed
    const std::vector<double> truth{3.0, 1.0};
    const int n = 5000;
    Rng rng(6);
    std::vector<double> xs(n);
    for (auto& x : xs) x = mg::quantile(mg::Family::lomax, truth, rng.uniform());

    const auto fit = mg::fit_mle(mg::Family::lomax, xs);
    CHECK(std::fabs(fit.theta[0] - 3.0) < 0.15);
    CHECK(std::fabs(fit.theta[1] - 1.0) < 0.1);
    CHECK(fit.converged);
    CHECK(fit.grad_sup_norm < 1e-6 * n);

    // brute-force likelihood grid: the fit must dominate every grid point
    double best = -1e300;
    for (int i = 0; i <= 60; ++i) {
        for (int j = 0; j <= 60; ++j) {
            const double a = 2.0 + i * (2.0 / 60.0);
            const double s = 0.5 + j * (1.0 / 60.0);
            best = std::max(best, mg::loglik(mg::Family::lomax, {a, s}, xs));
        }
    }
    CHECK(fit.loglik >= best - 1e-9);
}

TEST_CASE("fit input validation") {
    CHECK_THROWS_AS((void)mg::fit_mle(mg::Family::lomax, std::vector<double>{-1.0, 2.0, 3.0}),
                    support_violation);
    CHECK_THROWS_AS((void)mg::fit_mle(mg::Family::normal, std::vector<double>{1.0, 1.0, 1.0}),
                    degenerate_data);
    CHECK_THROWS_AS((void)mg::fit_mle(mg::Family::normal, std::vector<double>{1.0}),
                    invalid_parameters);
    CHECK_THROWS_AS((void)mg::cdf(mg::Family::lomax, {-1.0, 1.0}, 0.5), invalid_parameters);
}
