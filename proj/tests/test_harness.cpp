#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hfde/harness.hpp"
#include "oracles.hpp"

using namespace hfde;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig small_config(const std::string& dir) {
    ExperimentConfig c;
    c.model.name = "ou";
    c.theta0 = {1.0, 1.0};
    c.estimator = "quad-exact-efficient";
    c.sampling = SamplingRule(1.0, 0.6);
    c.n = 500;
    c.replications = 10;
    c.master_seed = 99;
    c.scheme = "exact";
    c.out_dir = dir;
    return c;
}

}  // namespace

TEST_CASE("summary statistics") {
    ReplicationRecord a, b;
    a.converged = b.converged = true;
    a.std_err_alpha_scaled = -1.0;
    b.std_err_alpha_scaled = 1.0;
    a.std_err_beta_scaled = b.std_err_beta_scaled = 0.4;
    const auto s = summarize({a, b});
    CHECK(s.m_converged == 2);
    CHECK(*s.var_alpha_scaled == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(*s.var_beta_scaled == doctest::Approx(0.0).epsilon(1e-12));

    // a single record leaves the moment fields unset
    const auto one = summarize({a});
    CHECK(one.m_converged == 1);
    CHECK_FALSE(one.var_alpha_scaled.has_value());
    CHECK_FALSE(one.correlation.has_value());

    // identical estimates give zero variance
    const auto same = summarize({a, a, a});
    CHECK(*same.var_alpha_scaled == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("config round trip through JSON") {
    auto c = small_config("/tmp/hfde-test");
    const auto c2 = ExperimentConfig::from_json_text(c.to_json());
    CHECK(c2.model.name == c.model.name);
    CHECK(c2.n == c.n);
    CHECK(c2.master_seed == c.master_seed);
    CHECK(c2.estimator == c.estimator);
    CHECK(c2.sampling.rho == c.sampling.rho);

    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{\"replications\": 0}"), ConfigError);
    CHECK_THROWS_AS(
        ExperimentConfig::from_json_text("{\"sampling\": {\"n_list\": [100, 100]}}"),
        ConfigError);
}

TEST_CASE("experiment outputs are byte-identical across worker counts") {
    std::filesystem::create_directories("/tmp/hfde-w1"); std::filesystem::create_directories("/tmp/hfde-w2");
    auto c1 = small_config("/tmp/hfde-w1");
    c1.workers = 1;
    auto c2 = small_config("/tmp/hfde-w2");
    c2.workers = 2;
    const auto r1 = run_experiment(c1);
    const auto r2 = run_experiment(c2);
    auto strip_dir = [](std::string s) {
        // out_dir is config echo; outputs must agree module the path itself
        const auto p1 = s.find("/tmp/hfde-w1");
        if (p1 != std::string::npos) s.replace(p1, 12, "OUT");
        const auto p2 = s.find("/tmp/hfde-w2");
        if (p2 != std::string::npos) s.replace(p2, 12, "OUT");
        return s;
    };
    CHECK(slurp("/tmp/hfde-w1/records.csv") == slurp("/tmp/hfde-w2/records.csv"));
    CHECK(strip_dir(slurp("/tmp/hfde-w1/summary.json")) ==
          strip_dir(slurp("/tmp/hfde-w2/summary.json")));

    // rerunning reproduces the files exactly
    const auto before = slurp("/tmp/hfde-w1/records.csv");
    run_experiment(c1);
    CHECK(slurp("/tmp/hfde-w1/records.csv") == before);

    // the CSV carries the documented header
    std::istringstream csv(slurp("/tmp/hfde-w1/records.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(header ==
          "rep,seed,converged,alpha_hat,beta_hat,std_err_alpha_scaled,std_err_beta_scaled");
    CHECK(r1.moments.m_total == 10);
    CHECK(r2.moments.m_total == 10);
}

TEST_CASE("hopeless solver settings abort the experiment") {
    std::filesystem::create_directories("/tmp/hfde-abort");
    auto c = small_config("/tmp/hfde-abort");
    c.tol_g = 1e-300;  // unattainable
    c.max_iter = 1;
    CHECK_THROWS_AS(run_experiment(c), NoConvergenceError);
}

TEST_CASE("rate scan requires a usable n list") {
    auto c = small_config("/tmp/hfde-abort");
    c.n_list = {100, 200};
    CHECK_THROWS_AS(rate_scan(c), ConfigError);
}

TEST_CASE("unwritable output directory: IO failure surfaces") {
    auto c = small_config("/nonexistent-hfde-dir/sub");
    CHECK_THROWS_AS(run_experiment(c), std::runtime_error);
}

TEST_CASE("standardized errors are asymptotically Gaussian at long horizons") {
    // horizon n*delta ~ 2100 tames the drift estimator's finite-sample skew,
    // delta ~ 0.01 keeps the diffusion block near its limit
    std::filesystem::create_directories("/tmp/hfde-normal");
    ExperimentConfig c;
    c.model.name = "ou";
    c.theta0 = {1.0, 1.0};
    c.estimator = "quad-exact-efficient";
    c.sampling = SamplingRule(16.0, 0.6);
    c.n = 200000;
    c.replications = 500;
    c.master_seed = 20240801;
    c.scheme = "exact";
    c.multistart = false;
    c.out_dir = "/tmp/hfde-normal";
    c.workers = 0;
    const auto rep = run_experiment(c);
    REQUIRE(rep.moments.m_converged >= 495);
    CHECK(std::abs(*rep.moments.skew_alpha) <= 0.25);
    CHECK(std::abs(*rep.moments.skew_beta) <= 0.25);
    CHECK(std::abs(*rep.moments.kurt_alpha) <= 0.5);
    CHECK(std::abs(*rep.moments.kurt_beta) <= 0.5);
    CHECK(std::abs(*rep.moments.correlation) <= 0.15);
    // the variance ratios stay near one at this scale as well
    CHECK(*rep.ratio_alpha > 0.8);
    CHECK(*rep.ratio_alpha < 1.2);
    CHECK(*rep.ratio_beta > 0.85);
    CHECK(*rep.ratio_beta < 1.15);
}
