#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hfde/simulate.hpp"
#include "oracles.hpp"

using namespace hfde;

namespace {
const ParamPoint th11{1.0, 1.0};
}

TEST_CASE("paths are deterministic functions of their inputs") {
    auto m = builtin_model("ou");
    for (const char* scheme : {"euler", "milstein", "exact"}) {
        const auto a = simulate_path(m, th11, 100, 0.01, 42, scheme);
        const auto b = simulate_path(m, th11, 100, 0.01, 42, scheme);
        REQUIRE(a.values.size() == 101);
        CHECK(a.values == b.values);
    }
    // distinct streams decorrelate replications, same stream reproduces
    SimulateOptions s0, s1;
    s1.stream = 1;
    const auto p0 = simulate_path(m, th11, 50, 0.01, 42, "exact", s0);
    const auto p1 = simulate_path(m, th11, 50, 0.01, 42, "exact", s1);
    const auto p0b = simulate_path(m, th11, 50, 0.01, 42, "exact", s0);
    CHECK(p0.values != p1.values);
    CHECK(p0.values == p0b.values);
}

TEST_CASE("exact scheme reproduces the stationary variance") {
    auto m = builtin_model("ou");
    const auto p = simulate_path(m, th11, 200000, 0.01, 42, "exact");
    const auto mom = oracle::moments(p.values);
    CHECK(mom.var > 0.475);
    CHECK(mom.var < 0.525);
}

TEST_CASE("vanishing noise recovers the deterministic flow") {
    auto m = builtin_model("ou");
    SimulateOptions opts;
    opts.x0 = 2.0;
    opts.substeps = 50;
    const auto p = simulate_path(m, {1.0, 1e-4}, 100, 0.01, 7, "euler", opts);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i)
        worst = std::max(worst, std::abs(p.values[i] - 2.0 * std::exp(-0.01 * i)));
    CHECK(worst < 1e-3);
}

TEST_CASE("sampling schedule") {
    const SamplingRule rule(1.0, 0.6);
    const double d = sampling_schedule(rule, 10000);
    CHECK(d == doctest::Approx(0.0039810717055349725).epsilon(1e-12));
    CHECK(10000.0 * d * d * d == doctest::Approx(6.30957344e-4).epsilon(1e-6));
    double prev = 0.0;
    for (std::size_t n : {100, 1000, 10000, 100000}) {
        const double nd = n * sampling_schedule(rule, n);
        CHECK(nd > prev);
        prev = nd;
    }
    CHECK_THROWS_AS(SamplingRule(1.0, 0.2), ConfigError);
    CHECK_THROWS_AS(SamplingRule(1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(SamplingRule(-1.0, 0.6), ConfigError);
}

TEST_CASE("euler weak error decays with the substep count") {
    // nearly-deterministic path: endpoint error against the exact flow is
    // O(delta / substeps)
    auto m = builtin_model("ou");
    std::vector<double> ls, le;
    for (int s : {1, 2, 4, 8}) {
        SimulateOptions opts;
        opts.x0 = 1.0;
        opts.substeps = s;
        const auto p = simulate_path(m, {1.0, 1e-8}, 1, 0.5, 3, "euler", opts);
        const double err = std::abs(p.values[1] - std::exp(-0.5));
        ls.push_back(std::log(static_cast<double>(s)));
        le.push_back(std::log(err));
    }
    CHECK(-oracle::slope(ls, le) >= 0.8);
}

TEST_CASE("full-truncation square-root paths stay nonnegative") {
    auto m = builtin_model("cir", 0.5);
    // boundary-hugging parameters (2 a m0 < b^2) exercise the truncation
    for (const char* scheme : {"euler", "milstein"}) {
        const auto p = simulate_path(m, {1.0, 1.2}, 20000, 0.05, 11, scheme);
        double lo = 1e300;
        for (double v : p.values) lo = std::min(lo, v);
        CHECK(lo >= 0.0);
    }
}

TEST_CASE("exact-scheme increments standardize to clean Gaussians") {
    auto m = builtin_model("ou");
    const double d = 0.05;
    const auto p = simulate_path(m, th11, 100000, d, 5, "exact");
    std::vector<double> z(p.values.size() - 1);
    const double sd = std::sqrt(oracle::ou_phi(d, 1.0, 1.0));
    for (std::size_t i = 1; i < p.values.size(); ++i)
        z[i - 1] = (p.values[i] - oracle::ou_F(d, p.values[i - 1], 1.0)) / sd;
    const auto mom = oracle::moments(z);
    CHECK(std::abs(mom.skew) < 0.1);
    CHECK(std::abs(mom.ex_kurt) < 0.2);
}

TEST_CASE("square-root stationary starts follow the gamma law") {
    // rejection sampler from the tabulated stationary density
    auto m = builtin_model("cir", 1.0);
    const ParamPoint th{1.0, 0.5};
    const int reps = 4000;
    std::vector<double> starts(reps);
    for (int i = 0; i < reps; ++i) {
        SimulateOptions opts;
        opts.stream = static_cast<std::uint64_t>(i);
        starts[i] = simulate_path(m, th, 1, 0.01, 123, "euler", opts).values[0];
    }
    const auto mom = oracle::moments(starts);
    // Gamma(8, 8): mean 1, var 1/8
    CHECK(std::abs(mom.mean - 1.0) < 4.0 * std::sqrt(0.125 / reps) + 1e-3);
    CHECK(mom.var == doctest::Approx(0.125).epsilon(0.1));
}

TEST_CASE("scheme availability errors") {
    auto cir = builtin_model("cir", 1.0);
    CHECK_THROWS_AS(simulate_path(cir, th11, 10, 0.01, 1, "exact"), ConfigError);
    auto ou = builtin_model("ou");
    CHECK_THROWS_AS(simulate_path(ou, th11, 10, 0.01, 1, "heun"), ConfigError);
    CHECK_THROWS_AS(simulate_path(ou, th11, 10, -0.01, 1, "euler"), std::invalid_argument);
}
