#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hfde/model.hpp"

namespace hfde {

// Equidistant observations X_0, X_Delta, ..., X_{n Delta}.
struct SamplePath {
    std::vector<double> values;
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::string scheme;
    int substeps = 1;

    std::size_t n_increments() const { return values.size() - 1; }
};

// Delta_n = c n^{-rho}; rho in (1/3, 1) keeps n Delta -> inf and n Delta^3 -> 0.
struct SamplingRule {
    double c = 1.0;
    double rho = 0.6;

    SamplingRule() = default;
    SamplingRule(double c_, double rho_) : c(c_), rho(rho_) {
        if (!(c > 0.0)) throw ConfigError("sampling rule: c must be > 0");
        if (!(rho > 1.0 / 3.0 && rho < 1.0))
            throw ConfigError("sampling rule: rho must lie in (1/3, 1)");
    }
};

double sampling_schedule(const SamplingRule& rule, std::size_t n);

struct SimulateOptions {
    int substeps = 0;                 // 0 = default policy (10 above delta 1e-3, else 1)
    std::optional<double> x0;         // explicit start; otherwise stationary draw
    std::uint64_t stream = 0;         // counter-based stream index (replication id)
};

// Schemes: "euler", "milstein", "exact" (exact is OU only). Output is a
// deterministic function of (model, theta, n, delta, seed, stream, scheme,
// substeps, x0).
SamplePath simulate_path(ModelPtr model, const ParamPoint& theta, std::size_t n, double delta,
                         std::uint64_t seed, const std::string& scheme = "euler",
                         const SimulateOptions& opts = {});

}  // namespace hfde
