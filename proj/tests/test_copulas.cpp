#include "doctest.h"

#include <array>
#include <cmath>
#include <vector>

#include "copgof/copulas.hpp"
#include "copgof/errors.hpp"
#include "copgof/rng.hpp"
#include "support/kendall.hpp"
#include "support/oracles.hpp"

using namespace copgof;
namespace cp = copgof::copulas;

namespace {

struct Case {
    cp::Family fam;
    std::vector<double> lambda;
};

const std::vector<Case> bivariate_cases{
    {cp::Family::independence, {}},       {cp::Family::clayton, {2.0}},
    {cp::Family::clayton, {0.7}},         {cp::Family::gumbel, {2.0}},
    {cp::Family::gumbel, {1.4}},          {cp::Family::frank, {6.589}},
    {cp::Family::frank, {-3.0}},          {cp::Family::cook_johnson, {1.5, 0.4}},
    {cp::Family::cook_johnson, {2.0, 0.9}}};

double cdf2(const Case& c, double u, double v) {
    const std::array<double, 2> pt{u, v};
    return cp::cdf(c.fam, c.lambda, pt);
}

} // namespace

TEST_CASE("cdf closed-form values") {
    CHECK(cdf2({cp::Family::clayton, {2.0}}, 0.5, 0.5) ==
          doctest::Approx(1.0 / std::sqrt(7.0)).epsilon(1e-12));
    CHECK(cdf2({cp::Family::gumbel, {2.0}}, 0.5, 0.5) ==
          doctest::Approx(std::pow(2.0, -std::sqrt(2.0))).epsilon(1e-12));
    // Frank tends to the independence copula as lambda -> 0
    CHECK(cdf2({cp::Family::frank, {1e-9}}, 0.3, 0.7) == doctest::Approx(0.21).epsilon(1e-8));
}

TEST_CASE("grounded df with uniform margins") {
    Rng rng(3);
    for (const auto& c : bivariate_cases) {
        for (int rep = 0; rep < 200; ++rep) {
            const double x = rng.uniform();
            CHECK(cdf2(c, 0.0, x) == 0.0);
            CHECK(cdf2(c, x, 0.0) == 0.0);
            CHECK(std::fabs(cdf2(c, x, 1.0) - x) < 1e-12);
            CHECK(std::fabs(cdf2(c, 1.0, x) - x) < 1e-12);
        }
    }
}

TEST_CASE("two-increasing on random rectangles") {
    Rng rng(5);
    for (const auto& c : bivariate_cases) {
        for (int rep = 0; rep < 200; ++rep) {
            double a1 = rng.uniform(), b1 = rng.uniform();
            double a2 = rng.uniform(), b2 = rng.uniform();
            if (a1 > b1) std::swap(a1, b1);
            if (a2 > b2) std::swap(a2, b2);
            const double mass = cdf2(c, b1, b2) - cdf2(c, a1, b2) - cdf2(c, b1, a2) +
                                cdf2(c, a1, a2);
            CHECK(mass >= -1e-12);
        }
    }
}

TEST_CASE("density values and mixed-difference oracle") {
    const std::array<double, 2> pt{0.4, 0.7};
    CHECK(cp::density(cp::Family::independence, {}, pt) == doctest::Approx(1.0));

    for (const auto& c : bivariate_cases) {
        if (c.fam == cp::Family::independence) continue;
        auto F = [&](double u, double v) { return cdf2(c, u, v); };
        for (const auto& p : {std::array<double, 2>{0.5, 0.5}, std::array<double, 2>{0.25, 0.7}}) {
            const double fd = oracles::mixed_diff(F, p[0], p[1], 1e-4);
            CHECK(oracles::rel_err(cp::density(c.fam, c.lambda, p), fd) < 2e-5);
        }
    }
}

TEST_CASE("density integrates to one") {
    // Graded tensor midpoint rule: the quintic smoothstep substitution
    // clusters nodes at the corners where Clayton/Gumbel densities blow up.
    auto normalization = [](const Case& c, int nodes) {
        auto phi = [](double x) { return x * x * x * (10.0 + x * (6.0 * x - 15.0)); };
        auto dphi = [](double x) { return 30.0 * x * x * (1.0 - x) * (1.0 - x); };
        const double h = 1.0 / nodes;
        double acc = 0.0;
        std::array<double, 2> pt{};
        for (int i = 0; i < nodes; ++i) {
            const double x = (i + 0.5) * h;
            for (int j = 0; j < nodes; ++j) {
                const double y = (j + 0.5) * h;
                pt[0] = phi(x);
                pt[1] = phi(y);
                acc += cp::density(c.fam, c.lambda, pt) * dphi(x) * dphi(y);
            }
        }
        return acc * h * h;
    };
    for (const auto& c : bivariate_cases)
        CHECK(std::fabs(normalization(c, 800) - 1.0) < 1e-5);

    // plain tensor midpoint for the smooth frank density
    std::array<double, 2> lo{0.0, 0.0}, hi{1.0, 1.0};
    const double plain = oracles::midpoint_integral(
        [&](std::span<const double> u) { return cp::density(cp::Family::frank, {6.589}, u); }, lo,
        hi, 800);
    CHECK(std::fabs(plain - 1.0) < 1e-6);
}

TEST_CASE("log-density gradients match finite differences") {
    const std::array<double, 2> pt{0.4, 0.7};
    const auto gi = cp::log_density_grads(cp::Family::independence, {}, pt);
    CHECK(gi.grad_u.norm() == 0.0);
    CHECK(gi.grad_lambda.size() == 0);

    Rng rng(17);
    for (const auto& c : bivariate_cases) {
        if (c.fam == cp::Family::independence) continue;
        for (int rep = 0; rep < 100; ++rep) {
            std::array<double, 2> p{rng.uniform(0.03, 0.97), rng.uniform(0.03, 0.97)};
            const auto g = cp::log_density_grads(c.fam, c.lambda, p);
            for (int j = 0; j < 2; ++j) {
                auto f = [&](double t) {
                    auto q = p;
                    q[static_cast<std::size_t>(j)] = t;
                    return cp::log_density(c.fam, c.lambda, q);
                };
                // step 1e-6: near the domain edge the third derivative is
                // large enough that 1e-5 leaves visible truncation error
                const double fd = oracles::central_diff(f, p[static_cast<std::size_t>(j)], 1e-6);
                CHECK(oracles::rel_err(g.grad_u[j], fd) < 1e-6);
            }
            for (int i = 0; i < cp::param_dim(c.fam); ++i) {
                auto f = [&](double t) {
                    auto l = c.lambda;
                    l[static_cast<std::size_t>(i)] = t;
                    return cp::log_density(c.fam, l, p);
                };
                const double fd =
                    oracles::central_diff(f, c.lambda[static_cast<std::size_t>(i)], 1e-5);
                CHECK(oracles::rel_err(g.grad_lambda[i], fd) < 1e-6);
            }
        }
    }
}

TEST_CASE("cdf partial derivatives") {
    const std::array<double, 2> pt{0.4, 0.7};
    CHECK(cp::partial_u(cp::Family::independence, {}, pt, 0) == doctest::Approx(0.7));

    // conditional df tends to 1 when the remaining coordinates sit at 1
    for (const auto& c : bivariate_cases) {
        const std::array<double, 2> edge{0.5, 1.0 - 1e-10};
        CHECK(cp::partial_u(c.fam, c.lambda, edge, 0) == doctest::Approx(1.0).epsilon(1e-6));
    }

    Rng rng(23);
    for (const auto& c : bivariate_cases) {
        for (int rep = 0; rep < 50; ++rep) {
            std::array<double, 2> p{rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
            for (int j = 0; j < 2; ++j) {
                const double got = cp::partial_u(c.fam, c.lambda, p, j);
                CHECK(got >= 0.0);
                CHECK(got <= 1.0 + 1e-12);
                auto f = [&](double t) {
                    auto q = p;
                    q[static_cast<std::size_t>(j)] = t;
                    return cp::cdf(c.fam, c.lambda, q);
                };
                const double fd = oracles::central_diff(f, p[static_cast<std::size_t>(j)], 1e-6);
                CHECK(oracles::rel_err(got, fd) < 1e-6);
            }
        }
    }
}

TEST_CASE("cdf lambda-gradient matches finite differences") {
    Rng rng(29);
    for (const auto& c : bivariate_cases) {
        if (c.fam == cp::Family::independence) {
            const std::array<double, 2> p{0.3, 0.3};
            CHECK(cp::cdf_lambda_grad(c.fam, c.lambda, p).size() == 0);
            continue;
        }
        for (int rep = 0; rep < 50; ++rep) {
            std::array<double, 2> p{rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
            const auto g = cp::cdf_lambda_grad(c.fam, c.lambda, p);
            for (int i = 0; i < cp::param_dim(c.fam); ++i) {
                auto f = [&](double t) {
                    auto l = c.lambda;
                    l[static_cast<std::size_t>(i)] = t;
                    return cp::cdf(c.fam, l, p);
                };
                const double fd =
                    oracles::central_diff(f, c.lambda[static_cast<std::size_t>(i)], 1e-5);
                CHECK(oracles::rel_err(g[i], fd) < 1e-6);
            }
        }
    }
}

TEST_CASE("cook-johnson reduces to clayton at lambda2 = 0") {
    for (int i = 1; i < 20; ++i) {
        for (int j = 1; j < 20; ++j) {
            const std::array<double, 2> p{i / 20.0, j / 20.0};
            CHECK(std::fabs(cp::cdf(cp::Family::cook_johnson, {1.7, 0.0}, p) -
                            cp::cdf(cp::Family::clayton, {1.7}, p)) < 1e-12);
        }
    }
}

TEST_CASE("samplers reproduce the family Kendall tau") {
    const int n = 100000;
    auto tau_of = [&](cp::Family fam, std::vector<double> lambda, std::uint64_t seed) {
        const auto s = cp::sample(fam, lambda, 2, n, seed);
        std::vector<std::pair<double, double>> xy(n);
        for (int i = 0; i < n; ++i) xy[static_cast<std::size_t>(i)] = {s(i, 0), s(i, 1)};
        return oracles::empirical_tau(std::move(xy));
    };
    CHECK(std::fabs(tau_of(cp::Family::independence, {}, 101)) < 0.01);
    CHECK(std::fabs(tau_of(cp::Family::clayton, {2.0}, 102) - 0.5) < 0.01);
    CHECK(std::fabs(tau_of(cp::Family::gumbel, {2.0}, 103) - 0.5) < 0.01);
    CHECK(std::fabs(tau_of(cp::Family::frank, {6.589}, 104) - 0.544) < 0.012);
    CHECK(std::fabs(tau_of(cp::Family::cook_johnson, {1.5, 0.4}, 105) -
                    cp::kendall_tau(cp::Family::cook_johnson, {1.5, 0.4})) < 0.012);

    // determinism and range
    const auto a = cp::sample(cp::Family::clayton, {2.0}, 2, 50, 7);
    const auto b = cp::sample(cp::Family::clayton, {2.0}, 2, 50, 7);
    CHECK((a - b).norm() == 0.0);
    CHECK(a.minCoeff() > 0.0);
    CHECK(a.maxCoeff() < 1.0);
}

TEST_CASE("frailty samplers in d = 3") {
    const int n = 60000;
    for (const auto fam : {cp::Family::clayton, cp::Family::gumbel}) {
        const auto s = cp::sample(fam, {2.0}, 3, n, 202);
        // every coordinate pair shares the exchangeable pairwise tau
        for (int a = 0; a < 3; ++a) {
            for (int b = a + 1; b < 3; ++b) {
                std::vector<std::pair<double, double>> xy(n);
                for (int i = 0; i < n; ++i) xy[static_cast<std::size_t>(i)] = {s(i, a), s(i, b)};
                CHECK(std::fabs(oracles::empirical_tau(std::move(xy)) - 0.5) < 0.015);
            }
        }
    }
}

TEST_CASE("dependence measures") {
    CHECK(cp::kendall_tau(cp::Family::clayton, {2.0}) == doctest::Approx(0.5));
    CHECK(cp::kendall_tau(cp::Family::gumbel, {2.0}) == doctest::Approx(0.5));
    CHECK(std::fabs(cp::kendall_tau(cp::Family::frank, {6.589}) - 0.544) < 0.001);
    CHECK(std::fabs(cp::spearman_rho(cp::Family::frank, {6.589}) - 0.743) < 0.001);
    // the generic quadrature path agrees with the closed forms
    CHECK(std::fabs(cp::spearman_rho(cp::Family::clayton, {2.0}) -
                    cp::spearman_rho(cp::Family::cook_johnson, {2.0, 0.0})) < 1e-6);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS((void)cp::kendall_tau(cp::Family::clayton, {-1.0}), invalid_parameters);
    CHECK_THROWS_AS((void)cp::kendall_tau(cp::Family::gumbel, {1.0}), invalid_parameters);
    CHECK_THROWS_AS((void)cp::kendall_tau(cp::Family::cook_johnson, {1.0, 1.5}),
                    invalid_parameters);
    const std::array<double, 2> boundary{0.0, 0.5};
    CHECK_THROWS_AS((void)cp::density(cp::Family::clayton, {2.0}, boundary), domain_error);
    const std::array<double, 3> pt3{0.3, 0.4, 0.5};
    CHECK_THROWS_AS((void)cp::cdf(cp::Family::frank, {2.0}, pt3), invalid_parameters);
}
