#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hfde/inference.hpp"
#include "hfde/simulate.hpp"
#include "hfde/solve.hpp"

namespace hfde {

struct ModelConfig {
    std::string name = "ou";
    double m0 = 1.0;  // cir long-run mean (the "fixed" block)

    ModelPtr build() const { return builtin_model(name, m0); }
};

struct ExperimentConfig {
    ModelConfig model;
    ParamPoint theta0{1.0, 1.0};
    std::string estimator = "quad-exact-efficient";
    SamplingRule sampling{1.0, 0.6};
    std::size_t n = 10000;
    std::vector<std::size_t> n_list;  // rate scans
    int replications = 100;
    std::uint64_t master_seed = 20240801;
    std::string scheme = "exact";
    int substeps = 0;  // 0 = scheme default
    ParamPoint start{1.0, 1.0};
    bool multistart = true;
    double tol_g = 1e-8;
    int max_iter = 60;
    int workers = 0;  // 0 = hardware concurrency
    std::string out_dir = ".";

    static ExperimentConfig from_json_file(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text);
    std::string to_json() const;
};

struct ReplicationRecord {
    int index = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    double g_norm = 0.0;
    ParamPoint theta_hat;
    double std_err_alpha_scaled = 0.0;  // sqrt(n Delta) (alpha_hat - alpha0)
    double std_err_beta_scaled = 0.0;   // sqrt(n) (beta_hat - beta0)
};

struct MomentSummary {
    int m_total = 0;
    int m_converged = 0;
    // present when at least two replications converged
    std::optional<double> var_alpha_scaled;
    std::optional<double> var_beta_scaled;
    std::optional<double> correlation;
    std::optional<double> skew_alpha, kurt_alpha;  // kurt = excess kurtosis
    std::optional<double> skew_beta, kurt_beta;
};

struct RateScanPoint {
    std::size_t n = 0;
    double delta = 0.0;
    double sd_alpha = 0.0;
    double sd_beta = 0.0;
    int m_converged = 0;
};

struct MCReport {
    ExperimentConfig config;
    MomentSummary moments;
    // theory comparison at theta0
    double theory_var_alpha = 0.0;  // W1/S11^2
    double theory_var_beta = 0.0;   // W2/S22^2
    double sigma_alpha = 0.0;       // efficient bound entries
    double sigma_beta = 0.0;
    std::optional<double> ratio_alpha;  // empirical / theory
    std::optional<double> ratio_beta;
    // rate scans
    std::vector<RateScanPoint> scan;
    std::optional<double> scan_slope_alpha;
    std::optional<double> scan_slope_beta;

    std::string to_json() const;
};

MomentSummary summarize(const std::vector<ReplicationRecord>& records);

// Runs M replications of simulate -> solve, writes <out_dir>/records.csv and
// <out_dir>/summary.json (byte-identical for identical configs regardless of
// the worker count), and returns the report.
MCReport run_experiment(const ExperimentConfig& config);

// One experiment per n in n_list; fits log sd(theta_hat) against log n.
MCReport rate_scan(const ExperimentConfig& config);

std::string records_csv(const std::vector<ReplicationRecord>& records);

}  // namespace hfde
