#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hfde/estfun.hpp"

namespace hfde {

struct NoConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BoundsEscapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParamBounds {
    double alpha_lo = -50.0, alpha_hi = 50.0;
    double beta_lo = 1e-8, beta_hi = 50.0;  // beta floor keeps sigma^2 > 0

    bool contains(const ParamPoint& p) const {
        return p.alpha >= alpha_lo && p.alpha <= alpha_hi && p.beta >= beta_lo &&
               p.beta <= beta_hi;
    }
    ParamPoint project(const ParamPoint& p) const {
        return ParamPoint{std::clamp(p.alpha, alpha_lo, alpha_hi),
                          std::clamp(p.beta, beta_lo, beta_hi)};
    }
};

struct SolveSettings {
    double tol_g = 1e-8;       // max |D_n G| at acceptance
    double tol_step = 1e-12;
    int max_iter = 60;
    double damping = 1.0;      // initial Newton step factor
    std::vector<ParamPoint> multistart;
    ParamBounds bounds;
    std::optional<double> fix_alpha;  // scalar fallback: solve in beta only
    std::optional<double> fix_beta;   // scalar fallback: solve in alpha only

    // the configured start plus the four +-20% sign combinations
    static SolveSettings defaults(const ParamPoint& start);
};

struct Estimate {
    ParamPoint theta_hat;
    double g_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    ParamPoint start_used;
    std::string diagnostic;  // per-start notes (singular Jacobian, bounds escapes)
};

// Damped Newton on the D_n-normalized system with a derivative-free fallback;
// deterministic across runs and invariant to start ordering.
Estimate solve_estimating_equation(const EstimatingFunction& ef, const SamplePath& path,
                                   const SolveSettings& settings);

// D_n = diag(1/sqrt(n Delta), 1/(Delta sqrt(n)))
Mat2 normalization_Dn(std::size_t n, double delta);

}  // namespace hfde
