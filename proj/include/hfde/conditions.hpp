#pragma once

#include <string>
#include <vector>

#include "hfde/estfun.hpp"
#include "hfde/model.hpp"

namespace hfde {

// Result of checking one optimality condition on a grid of states.
struct ConditionReport {
    std::string condition;  // jacobsen | extracond | drift-efficiency | diffusion-efficiency
    std::vector<double> grid;
    std::vector<double> residuals;
    double max_residual = 0.0;
    double tol = 0.0;
    bool pass = false;
};

struct ConditionReportPair {
    ConditionReport first;
    ConditionReport second;
    bool pass() const { return first.pass && second.pass; }
};

// Rate optimality: d_y g2(0,x,x) = 0 and d_alpha d^2_y g2(0,x,x) = 0.
ConditionReportPair check_rate_optimality(const EstimatingFunction& ef, ModelPtr model,
                                          const ParamPoint& theta,
                                          const std::vector<double>& grid, double tol = 1e-6);

// Efficiency: d_y g1(0,x,x) = d_alpha b / v and d^2_y g2(0,x,x) = d_beta v / v^2.
ConditionReportPair check_efficiency(const EstimatingFunction& ef, ModelPtr model,
                                     const ParamPoint& theta, const std::vector<double>& grid,
                                     double tol = 1e-6);

// Fitted order of |E[g(D, X_D, x)|x]| against the Delta grid, per coordinate.
struct MartingaleOrderProbe {
    struct Coordinate {
        bool exact = false;  // all conditional means below the 1e-12 floor
        double slope = 0.0;
        std::vector<double> means;  // |m(Delta)| on the grid
    };
    Coordinate g1, g2;
};

MartingaleOrderProbe probe_martingale_order(const EstimatingFunction& ef, ModelPtr model,
                                            const ParamPoint& theta, double x,
                                            const std::vector<double>& deltas,
                                            const std::string& engine = "exact",
                                            std::size_t mc_draws = 1000000,
                                            std::uint64_t mc_seed = 1234);

// Expansion identities: for k = 0..k_max, the binomial sum of
// generator powers applied to the Delta-derivatives of g must vanish at y = x.
struct IdentityReport {
    std::vector<double> max_residual_per_k;  // index k
    bool pass(double tol) const {
        for (double r : max_residual_per_k)
            if (!(r <= tol)) return false;
        return true;
    }
};

IdentityReport verify_expansion_identities(const EstimatingFunction& ef, ModelPtr model,
                             const ParamPoint& theta, const std::vector<double>& grid,
                             int k_max = 1);

// y-derivatives of a g coordinate at (delta, y = x): order 1..4
double ef_dy(const EstimatingFunction& ef, int coord, double delta, double x,
             const ParamPoint& theta, int order);

// d_alpha of d^2_y g2(0,x,x)
double ef_dalpha_d2y_g2(const EstimatingFunction& ef, double x, const ParamPoint& theta);

std::vector<double> default_condition_grid(ModelPtr model, const ParamPoint& theta);

}  // namespace hfde
