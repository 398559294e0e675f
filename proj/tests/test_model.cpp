#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hfde/model.hpp"
#include "hfde/quadrature.hpp"
#include "hfde/simulate.hpp"
#include "oracles.hpp"

using namespace hfde;

namespace {
const ParamPoint th11{1.0, 1.0};
}

TEST_CASE("generator on the linear model, order 1") {
    auto m = builtin_model("ou");
    auto f = ScalarField::polynomial({0.0, 0.0, 1.0});  // x^2

    // finite-difference oracle: (E[f(X_d)|x] - f(x))/d with the exact
    // transition moments, Richardson-extrapolated d -> 0
    auto transition_mean_f = [&](double d, double x) {
        const double F = oracle::ou_F(d, x, 1.0);
        return F * F + oracle::ou_phi(d, 1.0, 1.0);
    };
    const double x = 2.0;
    auto T = [&](double d) { return (transition_mean_f(d, x) - x * x) / d; };
    const double d0 = 1e-3;
    const double extrapolated = 2.0 * T(d0 / 2) - T(d0);

    const double L = apply_generator(*m, th11, f, 1, x);
    CHECK(L == doctest::Approx(-7.0).epsilon(1e-10));
    CHECK(L == doctest::Approx(extrapolated).epsilon(1e-5));
}

TEST_CASE("generator kills constants") {
    auto m = builtin_model("ou");
    auto c = ScalarField::polynomial({3.5});
    CHECK(apply_generator(*m, th11, c, 1, 0.7) == doctest::Approx(0.0).epsilon(1e-14));
    auto cir = builtin_model("cir", 1.0);
    CHECK(apply_generator(*cir, {1.0, 0.5}, c, 2, 0.9) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("generator order 2 matches the d^2/2 coefficient of the conditional mean") {
    auto m = builtin_model("ou");
    auto f = ScalarField::polynomial({0.0, 1.0});  // x
    const double x = 2.0;
    // second delta-derivative of the exact conditional mean at 0
    const double h = 1e-4;
    const double d2 = (oracle::ou_F(2 * h, x, 1.0) - 2.0 * oracle::ou_F(h, x, 1.0) + x) / (h * h);
    const double L2 = apply_generator(*m, th11, f, 2, x);
    CHECK(L2 == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(L2 == doctest::Approx(d2).epsilon(1e-4));
}

TEST_CASE("order-k application equals k-fold composition of order 1") {
    auto ou = builtin_model("ou");
    auto f = ScalarField::polynomial({0.0, 0.0, 1.0});
    const double x = 1.3;

    // analytic composition: L(x^2) = -2x^2 + 1 for alpha = beta = 1
    auto Lf = ScalarField::polynomial({1.0, 0.0, -2.0});
    CHECK(apply_generator(*ou, th11, f, 2, x) ==
          doctest::Approx(apply_generator(*ou, th11, Lf, 1, x)).epsilon(1e-12));

    // finite-difference composition path on the square-root model
    auto cir = builtin_model("cir", 1.0);
    const ParamPoint thc{1.0, 0.5};
    auto Lf_fd = ScalarField::from_function(
        [&](double z) { return apply_generator(*cir, thc, f, 1, z); }, 4);
    const double composed = apply_generator(*cir, thc, Lf_fd, 1, 0.8);
    const double direct = apply_generator(*cir, thc, f, 2, 0.8);
    CHECK(composed == doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("transition expansion truncation order") {
    // |pi^{1,d} f - sum_{i<=k} d^i/i! L^i f| should shrink like d^{k+1}
    auto m = builtin_model("ou");
    const double x = 1.7;
    const std::vector<double> deltas{0.2, 0.1, 0.05, 0.025};
    for (int k : {1, 2}) {
        for (int which : {0, 1}) {  // f = x, f = x^2
            auto f = which == 0 ? ScalarField::polynomial({0.0, 1.0})
                                : ScalarField::polynomial({0.0, 0.0, 1.0});
            auto exact = [&](double d) {
                const double F = oracle::ou_F(d, x, 1.0);
                return which == 0 ? F : F * F + oracle::ou_phi(d, 1.0, 1.0);
            };
            std::vector<double> lx, ly;
            for (double d : deltas) {
                double trunc = f(x, 0);
                double fact = 1.0, dpow = 1.0;
                for (int i = 1; i <= k; ++i) {
                    fact *= i;
                    dpow *= d;
                    trunc += dpow / fact * apply_generator(*m, th11, f, i, x);
                }
                const double r = std::abs(exact(d) - trunc);
                lx.push_back(std::log(d));
                ly.push_back(std::log(std::max(r, 1e-300)));
            }
            CHECK(oracle::slope(lx, ly) >= k + 0.7);
        }
    }
}

TEST_CASE("stationary density of the linear model is the Gaussian law") {
    auto m = builtin_model("ou");
    CHECK(stationary_density(m, th11, 0.0) == doctest::Approx(0.5641895835).epsilon(1e-7));
    for (double x : {-2.0, -1.2, -0.3, 0.4, 1.5, 2.5}) {
        CHECK(stationary_density(m, th11, x) ==
              doctest::Approx(oracle::gauss_pdf(x, 0.0, 0.5)).epsilon(1e-8));
        CHECK(stationary_density(m, th11, x) ==
              doctest::Approx(stationary_density(m, th11, -x)).epsilon(1e-10));
    }
    auto law = stationary_law(m, th11);
    CHECK(law->expectation([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("stationary expectations by quadrature") {
    auto m = builtin_model("ou");
    CHECK(stationary_expectation(m, th11, ScalarField::polynomial({0.0, 0.0, 1.0})) ==
          doctest::Approx(0.5).epsilon(1e-8));
    CHECK(stationary_expectation(m, th11, ScalarField::polynomial({1.0})) ==
          doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(stationary_expectation(m, th11, ScalarField::polynomial({0.0, 1.0}))) <
          1e-8);
}

TEST_CASE("builtin model coefficients and exact moments") {
    auto m = builtin_model("ou");
    CHECK(m->drift(2.0, th11, 0) == doctest::Approx(-2.0).epsilon(1e-14));
    const double F = m->exact_moments->F(0.1, 2.0, th11);
    CHECK(F == doctest::Approx(1.8096748).epsilon(1e-7));

    // fine-grid one-step Monte Carlo mean as an independent check
    double acc = 0.0;
    const int reps = 20000;
    for (int i = 0; i < reps; ++i) {
        SimulateOptions opts;
        opts.x0 = 2.0;
        opts.substeps = 64;
        opts.stream = static_cast<std::uint64_t>(i);
        acc += simulate_path(m, th11, 1, 0.1, 99, "euler", opts).values[1];
    }
    acc /= reps;
    const double mc_se = std::sqrt(oracle::ou_phi(0.1, 1.0, 1.0) / reps);
    CHECK(std::abs(acc - F) < 4.0 * mc_se + 1e-3);
}

TEST_CASE("square-root model stationary law matches the gamma law") {
    auto m = builtin_model("cir", 1.0);
    const ParamPoint th{1.0, 0.5};
    auto law = stationary_law(m, th);
    CHECK(law->expectation([](double x) { return x; }) == doctest::Approx(1.0).epsilon(1e-6));
    const double shape = oracle::cir_shape(1.0, 0.5, 1.0);
    const double rate = oracle::cir_rate(1.0, 0.5);
    for (double x : {0.4, 0.8, 1.0, 1.5, 2.2})
        CHECK(law->density(x) ==
              doctest::Approx(oracle::gamma_pdf(x, shape, rate)).epsilon(1e-7));
}

TEST_CASE("finite-difference partials agree with the analytic builtins") {
    auto ou = builtin_model("ou");
    auto fd = make_custom_model(
        "ou-fd", [](double x, double a) { return -a * x; },
        [](double, double b) { return b; },
        StateInterval{-std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()},
        0.0);
    for (int i = 0; i < 20; ++i) {
        const double x = -2.0 + 4.0 * i / 19.0;
        CHECK(fd->drift_dalpha(x, th11) ==
              doctest::Approx(ou->drift_dalpha(x, th11)).epsilon(1e-6));
        CHECK(fd->diffusion_sq_dbeta(x, th11) ==
              doctest::Approx(ou->diffusion_sq_dbeta(x, th11)).epsilon(1e-6));
        for (int k = 1; k <= 4; ++k) {
            CHECK(std::abs(fd->drift(x, th11, k) - ou->drift(x, th11, k)) < 1e-6);
            CHECK(std::abs(fd->diffusion_sq(x, th11, k) - ou->diffusion_sq(x, th11, k)) < 1e-6);
        }
    }
}

TEST_CASE("domain and capability errors") {
    auto cir = builtin_model("cir", 1.0);
    auto f = ScalarField::polynomial({0.0, 1.0});
    CHECK_THROWS_AS(apply_generator(*cir, th11, f, 1, -1.0), DomainError);
    CHECK_THROWS_AS(apply_generator(*cir, th11, f, 4, 1.0), std::invalid_argument);
    auto shallow = ScalarField::from_function([](double x) { return x * x; }, 2);
    CHECK_THROWS_AS(apply_generator(*cir, th11, shallow, 2, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(builtin_model("gbm"), ConfigError);
    CHECK_THROWS_AS(builtin_model("cir", -1.0), ConfigError);
    CHECK_THROWS_AS(stationary_density(cir, th11, -0.5), DomainError);
}

TEST_CASE("stationary quantile grid is ordered and inside the interval") {
    auto m = builtin_model("ou");
    const auto grid = stationary_quantile_grid(m, th11, 21);
    CHECK(grid.size() == 21);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
    // 2.5% and 97.5% quantiles of N(0, 0.5)
    CHECK(grid.front() == doctest::Approx(-1.3859038).epsilon(1e-3));
    CHECK(grid.back() == doctest::Approx(1.3859038).epsilon(1e-3));
}
