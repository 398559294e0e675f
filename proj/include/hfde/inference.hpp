#pragma once

#include <string>
#include <vector>

#include "hfde/estfun.hpp"
#include "hfde/solve.hpp"

namespace hfde {

// Limit quantities of the high-frequency asymptotics, by quadrature against
// the stationary law at theta0.
struct AsymptoticsReport {
    Mat2 S;                 // sensitivity
    Mat2 V;                 // variability (general theory)
    double W1 = 0.0;        // alpha-block variability
    double W2 = 0.0;        // beta-block variability, rate-optimal theory
    Mat2 cov_general;       // S^-1 V S^-T
    Mat2 cov_rate_optimal;  // diag(W1/S11^2, W2/S22^2)
    Mat2 sigma_bound;       // efficient bound at theta0
};

AsymptoticsReport theoretical_asymptotics(const EstimatingFunction& ef, ModelPtr model,
                                          const ParamPoint& theta, const ParamPoint& theta0);

struct EmpiricalCovariance {
    Mat2 S_hat;
    Mat2 V_or_W_hat;
    Mat2 cov_hat;
    std::string mode;  // "general" | "rate-optimal"
};

EmpiricalCovariance empirical_covariance(const EstimatingFunction& ef, const SamplePath& path,
                                         const ParamPoint& theta_hat, const std::string& mode);

// Identifiability diagnostic gamma(theta, theta0) on a grid of thetas.
std::vector<Vec2> gamma_curve(const EstimatingFunction& ef, ModelPtr model,
                              const ParamPoint& theta0, const std::vector<ParamPoint>& thetas);

// Efficient bound Sigma(theta0) = diag(1/I_alpha, 2/I_beta).
Mat2 efficient_bound(ModelPtr model, const ParamPoint& theta0);

}  // namespace hfde
