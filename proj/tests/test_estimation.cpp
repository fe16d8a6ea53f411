#include "doctest.h"

#include <cmath>
#include <vector>

#include "copgof/copulas.hpp"
#include "copgof/errors.hpp"
#include "copgof/estimation.hpp"
#include "copgof/margins.hpp"
#include "copgof/rng.hpp"
#include "support/oracles.hpp"

using namespace copgof;
namespace es = copgof::estimation;
namespace cp = copgof::copulas;
namespace mg = copgof::margins;

namespace {

es::Dataset make_dataset(mg::Family mfam, const std::vector<std::vector<double>>& thetas,
                         cp::Family cfam, const std::vector<double>& lambda, int n,
                         std::uint64_t seed) {
    const int d = static_cast<int>(thetas.size());
    es::Dataset ds;
    ds.values = cp::sample(cfam, lambda, d, n, seed);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            ds.values(i, j) =
                mg::quantile(mfam, thetas[static_cast<std::size_t>(j)], ds.values(i, j));
    return ds;
}

} // namespace

TEST_CASE("independence copula decouples the joint fit") {
    auto ds = make_dataset(mg::Family::normal, {{0.0, 1.0}, {2.0, 0.5}}, cp::Family::independence,
                           {}, 300, 99);
    const auto joint = es::fit_joint_mle(ds, mg::Family::normal, cp::Family::independence);
    const auto sep = es::fit_margins_only(ds, mg::Family::normal, cp::Family::independence, {});

    CHECK(joint.lambda.empty());
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i)
            CHECK(std::fabs(joint.thetas[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] -
                            sep.thetas[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) <
                  1e-8);
    CHECK(joint.loglik == doctest::Approx(sep.loglik).epsilon(1e-10));

    // per-column closed-form normal MLE
    for (int j = 0; j < 2; ++j) {
        const auto col = ds.values.col(j);
        const double mean = col.mean();
        CHECK(sep.thetas[static_cast<std::size_t>(j)][0] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("margins-only closed forms and delegation") {
    es::Dataset ds;
    ds.values.resize(4, 2);
    ds.values.col(0) << 1.0, 3.0, 2.0, 2.0;
    ds.values.col(1) << 0.5, 1.5, 1.0, 1.1;
    const auto fit =
        es::fit_margins_only(ds, mg::Family::exponential, cp::Family::clayton, {2.0});
    CHECK(fit.thetas[0][0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.copula_fixed);
    CHECK(fit.lambda[0] == 2.0);

    // lomax margins: column fit must match margin_fit_mle exactly
    auto lds = make_dataset(mg::Family::lomax, {{3.0, 1.0}, {3.0, 1.0}}, cp::Family::clayton,
                            {2.0}, 500, 17);
    const auto whole = es::fit_margins_only(lds, mg::Family::lomax, cp::Family::clayton, {2.0});
    for (int j = 0; j < 2; ++j) {
        const auto col = lds.values.col(j);
        const auto single = mg::fit_mle(
            mg::Family::lomax, std::span<const double>(col.data(), static_cast<std::size_t>(500)));
        CHECK(whole.thetas[static_cast<std::size_t>(j)][0] == single.theta[0]);
        CHECK(whole.thetas[static_cast<std::size_t>(j)][1] == single.theta[1]);
    }
}

TEST_CASE("joint fit recovers frank dependence on normal margins") {
    // the data-analysis configuration: n = 655, normal margins, frank 6.589
    int within = 0;
    const int reps = 50;
    std::vector<double> lams(reps);
    double sum = 0.0;
    for (int r = 0; r < reps; ++r) {
        auto ds = make_dataset(mg::Family::normal, {{1.025, 0.136}, {1.021, 0.178}},
                               cp::Family::frank, {6.589}, 655, 1000 + r);
        const auto fit = es::fit_joint_mle(ds, mg::Family::normal, cp::Family::frank);
        CHECK(fit.diagnostics.converged);
        CHECK(fit.diagnostics.grad_sup_norm < 1e-6 * 655);
        lams[static_cast<std::size_t>(r)] = fit.lambda[0];
        sum += fit.lambda[0];
        if (std::fabs(fit.lambda[0] - 6.589) < 0.8) ++within;

        // the optimum dominates the generating parameters
        const double ll_truth = es::joint_loglik(ds, mg::Family::normal,
                                                 {{1.025, 0.136}, {1.021, 0.178}},
                                                 cp::Family::frank, {6.589});
        CHECK(fit.loglik >= ll_truth - 1e-6);
    }
    // sampling-distribution check: +-0.8 is ~2 empirical sd, so expect ~95%
    // coverage per replicate; every replicate must sit inside 4 sd
    const double mean = sum / reps;
    double ss = 0.0;
    for (double l : lams) ss += (l - mean) * (l - mean);
    const double sd = std::sqrt(ss / reps);
    CHECK(within >= 45);
    for (double l : lams) CHECK(std::fabs(l - 6.589) < 4.0 * sd);
    CHECK(std::fabs(mean - 6.589) < 4.0 * sd / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("joint fit recovers clayton dependence on exponential margins") {
    int within = 0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        auto ds = make_dataset(mg::Family::exponential, {{1.0}, {1.0}}, cp::Family::clayton,
                               {2.0}, 200, 5000 + r);
        const auto fit = es::fit_joint_mle(ds, mg::Family::exponential, cp::Family::clayton);
        if (std::fabs(fit.lambda[0] - 2.0) < 0.6) ++within;
    }
    CHECK(within >= 190); // >= 95%
}

TEST_CASE("joint fit against a likelihood-grid oracle") {
    auto ds = make_dataset(mg::Family::exponential, {{1.0}, {1.0}}, cp::Family::clayton, {2.0},
                           200, 4242);
    const auto fit = es::fit_joint_mle(ds, mg::Family::exponential, cp::Family::clayton);
    // brute-force grid over (rate1, rate2, lambda)
    double best = -1e300;
    for (int a = 0; a <= 25; ++a)
        for (int b = 0; b <= 25; ++b)
            for (int l = 0; l <= 40; ++l) {
                const std::vector<std::vector<double>> th{{0.6 + a * 0.04}, {0.6 + b * 0.04}};
                const std::vector<double> lam{1.0 + l * 0.05};
                best = std::max(best, es::joint_loglik(ds, mg::Family::exponential, th,
                                                       cp::Family::clayton, lam));
            }
    CHECK(fit.loglik >= best - 1e-9);
}

TEST_CASE("pseudo-observations") {
    es::Dataset ds;
    ds.values.resize(3, 2);
    ds.values << std::log(2.0), 0.3, 0.7, 1.1, 1.9, 0.2;

    es::FittedModel exact;
    exact.margin_family = mg::Family::exponential;
    exact.thetas = {{1.0}, {1.0}};
    exact.copula_family = cp::Family::independence;
    exact.copula_fixed = true;

    const auto u = es::pseudo_observations(ds, exact);
    CHECK(u(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK((u.array() > 0.0).all());
    CHECK((u.array() < 1.0).all());

    // the empirical df of the pseudo-observations is the estimator C-hat:
    // F_n(Q(a), Q(b)) = (1/n) sum 1{U_i <= (a,b)} pointwise
    for (double a : {0.1, 0.35, 0.5, 0.72, 0.9}) {
        for (double b : {0.15, 0.4, 0.63, 0.88}) {
            const double qa = mg::quantile(mg::Family::exponential, {1.0}, a);
            const double qb = mg::quantile(mg::Family::exponential, {1.0}, b);
            int fn = 0, cn = 0;
            for (int i = 0; i < 3; ++i) {
                if (ds.values(i, 0) <= qa && ds.values(i, 1) <= qb) ++fn;
                if (u(i, 0) <= a && u(i, 1) <= b) ++cn;
            }
            CHECK(fn == cn);
        }
    }

    // monotone within columns
    auto big = make_dataset(mg::Family::normal, {{0.0, 1.0}, {0.0, 1.0}}, cp::Family::clayton,
                            {2.0}, 400, 3);
    const auto fit = es::fit_margins_only(big, mg::Family::normal, cp::Family::clayton, {2.0});
    const auto ub = es::pseudo_observations(big, fit);
    for (int j = 0; j < 2; ++j)
        for (int i = 1; i < 400; ++i) {
            const bool xless = big.values(i - 1, j) < big.values(i, j);
            const bool uless = ub(i - 1, j) < ub(i, j);
            CHECK(xless == uless);
        }

    // approximate uniformity of column means under a correct fit
    for (int j = 0; j < 2; ++j)
        CHECK(std::fabs(ub.col(j).mean() - 0.5) < 3.0 / std::sqrt(12.0 * 400));
}

TEST_CASE("tie detection") {
    es::Dataset ds;
    ds.values.resize(3, 2);
    ds.values << 1.0, 0.3, 1.0, 0.5, 2.0, 0.9;
    const auto tied = ds.tied_columns();
    REQUIRE(tied.size() == 1);
    CHECK(tied[0] == 0);

    es::FittedModel m;
    m.margin_family = mg::Family::exponential;
    m.thetas = {{1.0}, {1.0}};
    m.copula_family = cp::Family::independence;
    std::vector<std::string> warnings;
    (void)es::pseudo_observations(ds, m, &warnings);
    CHECK(warnings.size() == 1);
}

TEST_CASE("fit input guards") {
    es::Dataset tiny;
    tiny.values.resize(2, 2);
    tiny.values << 1.0, 2.0, 3.0, 4.0;
    CHECK_THROWS_AS(
        (void)es::fit_joint_mle(tiny, mg::Family::normal, cp::Family::cook_johnson),
        invalid_parameters);

    es::Dataset constant;
    constant.values.resize(10, 2);
    constant.values.col(0).setConstant(1.0);
    constant.values.col(1).setLinSpaced(10, 0.1, 2.0);
    CHECK_THROWS_AS((void)es::fit_joint_mle(constant, mg::Family::normal, cp::Family::clayton),
                    degenerate_data);

    es::Dataset neg;
    neg.values.resize(10, 2);
    neg.values.col(0).setLinSpaced(10, -1.0, 2.0);
    neg.values.col(1).setLinSpaced(10, 0.1, 2.0);
    CHECK_THROWS_AS((void)es::fit_joint_mle(neg, mg::Family::exponential, cp::Family::clayton),
                    support_violation);
}
