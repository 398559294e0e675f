#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hfde/inference.hpp"
#include "hfde/simulate.hpp"
#include "oracles.hpp"

using namespace hfde;

namespace {
const ParamPoint th11{1.0, 1.0};
}

TEST_CASE("theoretical limit quantities for the efficient quadratic") {
    auto m = builtin_model("ou");
    auto ef = catalog_ef("quad-exact-efficient", m);
    const auto rep = theoretical_asymptotics(ef, m, th11, th11);

    CHECK(rep.S(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(rep.S(1, 1) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(std::abs(rep.S(1, 0)) < 1e-8);  // the rate condition zeroes this entry
    CHECK(rep.W1 == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(rep.W2 == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(rep.cov_rate_optimal(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(rep.cov_rate_optimal(1, 1) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(rep.cov_general(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(rep.sigma_bound(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(rep.sigma_bound(1, 1) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("rate-optimal covariance attains the bound exactly for efficient functions") {
    auto m = builtin_model("ou");
    for (const auto& name : {std::string("euler"), std::string("gh-quadratic"),
                             std::string("local-gaussian")}) {
        auto ef = catalog_ef(name, m);
        const auto rep = theoretical_asymptotics(ef, m, th11, th11);
        INFO(name);
        CHECK(rep.cov_rate_optimal(0, 0) ==
              doctest::Approx(rep.sigma_bound(0, 0)).epsilon(1e-6));
        CHECK(rep.cov_rate_optimal(1, 1) ==
              doctest::Approx(rep.sigma_bound(1, 1)).epsilon(1e-6));
    }
}

TEST_CASE("variability grows away from the true diffusion parameter") {
    auto m = builtin_model("ou");

    // canonical weights rescale with beta, so compare against the closed form
    // and against the same expression with the (v0 - v)^2 term dropped
    auto ef = catalog_ef("quad-exact-efficient", m);
    for (double beta : {0.8, 1.0, 1.2}) {
        const auto rep = theoretical_asymptotics(ef, m, {1.0, beta}, th11);
        const double d2 = 2.0 / (beta * beta * beta);
        const double vdiff = 1.0 - beta * beta;
        const double closed = 0.5 * (1.0 + 0.5 * vdiff * vdiff) * d2 * d2;
        const double base = 0.5 * d2 * d2;
        CHECK(rep.W2 == doctest::Approx(closed).epsilon(1e-6));
        CHECK(rep.W2 >= base - 1e-9);
        if (beta != 1.0) CHECK(rep.W2 > base + 1e-6);
    }

    // with a beta-free second weight the monotone statement holds literally
    Weight2x2 w;
    w.A = [m](double x, double, const ParamPoint& th) {
        const double v = m->diffusion_sq(x, th, 0);
        return Mat2::diag(m->drift_dalpha(x, th) / v, 1.0);
    };
    auto flat = quadratic_ef(m, w, MomentSpec::Exact(), "quad-flat-a2");
    const double w2_truth = theoretical_asymptotics(flat, m, th11, th11).W2;
    for (double beta : {0.8, 1.2, 1.5}) {
        const auto rep = theoretical_asymptotics(flat, m, {1.0, beta}, th11);
        CHECK(rep.W2 > w2_truth);
    }
}

TEST_CASE("normalization matrix entries") {
    const Mat2 Dn = normalization_Dn(100, 0.1);
    CHECK(Dn(0, 0) == doctest::Approx(0.3162278).epsilon(1e-7));
    CHECK(Dn(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empirical covariance blocks on simulated data") {
    auto m = builtin_model("ou");
    auto ef = catalog_ef("quad-exact-efficient", m);
    const std::size_t n = 20000;
    const double delta = sampling_schedule(SamplingRule(1.0, 0.6), n);
    const auto path = simulate_path(m, th11, n, delta, 39, "exact");
    SolveSettings s = SolveSettings::defaults(th11);
    const auto est = solve_estimating_equation(ef, path, s);
    REQUIRE(est.converged);

    const auto ro = empirical_covariance(ef, path, est.theta_hat, "rate-optimal");
    CHECK(ro.S_hat(0, 0) > 0.45);
    CHECK(ro.S_hat(0, 0) < 0.55);
    CHECK(ro.V_or_W_hat(0, 1) == doctest::Approx(ro.V_or_W_hat(1, 0)).epsilon(1e-12));
    CHECK(ro.cov_hat(0, 0) > 0.0);
    CHECK(ro.cov_hat(1, 1) > 0.0);

    const auto ge = empirical_covariance(ef, path, est.theta_hat, "general");
    CHECK(ge.V_or_W_hat(0, 0) >= 0.0);
    CHECK(ge.V_or_W_hat.det() >= -1e-12);  // gg^T sums are PSD
    // both modes estimate the same alpha block
    const double ratio = ge.cov_hat(0, 0) / ro.cov_hat(0, 0);
    CHECK(ratio > 0.9);
    CHECK(ratio < 1.1);

    CHECK_THROWS_AS(empirical_covariance(ef, path, est.theta_hat, "bogus"), ConfigError);
}

TEST_CASE("identifiability diagnostic") {
    auto m = builtin_model("ou");
    auto ef = catalog_ef("quad-exact-efficient", m);
    const auto g = gamma_curve(ef, m, th11,
                               {th11, ParamPoint{2.0, 1.0}, ParamPoint{1.0, 1.2}});
    CHECK(std::abs(g[0].x0) < 1e-8);
    CHECK(std::abs(g[0].x1) < 1e-8);
    CHECK(g[1].x0 == doctest::Approx(-0.5).epsilon(1e-6));
    CHECK(std::abs(g[1].x1) < 1e-8);
    CHECK(std::abs(g[2].x0) < 1e-8);
    // (1/2)(v0 - v) d_beta v / v^2 = (1/2)(1 - 1.44) * 2 / 1.2^3, constant in x
    CHECK(g[2].x1 == doctest::Approx(-0.25462963).epsilon(1e-6));
}

TEST_CASE("efficient bound for the square-root model against gamma-law closed forms") {
    auto m = builtin_model("cir", 1.0);
    const ParamPoint th{1.0, 0.5};
    const Mat2 sigma = efficient_bound(m, th);
    // E[(1-x)^2/x] under Gamma(8, 8) is 1/7, diffusion information is 4/beta^2
    const double sigma_alpha = 0.25 * 7.0;
    const double sigma_beta = 0.5 * 0.25;
    CHECK(sigma(0, 0) == doctest::Approx(sigma_alpha).epsilon(1e-6));
    CHECK(sigma(1, 1) == doctest::Approx(sigma_beta).epsilon(1e-6));
    CHECK(sigma(0, 1) == 0.0);
    CHECK(sigma(1, 0) == 0.0);
    CHECK(sigma(0, 0) > 0.0);
    CHECK(sigma(1, 1) > 0.0);
}
