#include "hfde/conditions.hpp"

#include <cmath>

#include "hfde/rng.hpp"
#include "hfde/stencil.hpp"

namespace hfde {

double ef_dy(const EstimatingFunction& ef, int coord, double delta, double x,
             const ParamPoint& theta, int order) {
    auto slice = [&](double y) {
        const Vec2 g = ef.eval(delta, y, x, theta);
        return coord == 0 ? g.x0 : g.x1;
    };
    const double h = 1e-4 * (1.0 + std::abs(x));
    const double r = dn_central(slice, x, order, h);
    if (!std::isfinite(r)) throw std::runtime_error("condition check: non-finite y-derivative");
    return r;
}

double ef_dalpha_d2y_g2(const EstimatingFunction& ef, double x, const ParamPoint& theta) {
    const double h = 1e-4 * (1.0 + std::abs(theta.alpha));
    const double p = ef_dy(ef, 1, 0.0, x, ParamPoint{theta.alpha + h, theta.beta}, 2);
    const double m = ef_dy(ef, 1, 0.0, x, ParamPoint{theta.alpha - h, theta.beta}, 2);
    return (p - m) / (2 * h);
}

namespace {

ConditionReport run_on_grid(std::string name, const std::vector<double>& grid, double tol,
                            const std::function<double(double)>& residual_at) {
    ConditionReport rep;
    rep.condition = std::move(name);
    rep.grid = grid;
    rep.tol = tol;
    rep.residuals.reserve(grid.size());
    for (double x : grid) {
        const double r = std::abs(residual_at(x));
        rep.residuals.push_back(r);
        rep.max_residual = std::max(rep.max_residual, r);
    }
    rep.pass = rep.max_residual <= tol;
    return rep;
}

}  // namespace

ConditionReportPair check_rate_optimality(const EstimatingFunction& ef, ModelPtr model,
                                          const ParamPoint& theta,
                                          const std::vector<double>& grid, double tol) {
    for (double x : grid) model->require_inside(x);
    ConditionReportPair out;
    out.first = run_on_grid("jacobsen", grid, tol,
                            [&](double x) { return ef_dy(ef, 1, 0.0, x, theta, 1); });
    out.second = run_on_grid("extracond", grid, tol,
                             [&](double x) { return ef_dalpha_d2y_g2(ef, x, theta); });
    return out;
}

ConditionReportPair check_efficiency(const EstimatingFunction& ef, ModelPtr model,
                                     const ParamPoint& theta, const std::vector<double>& grid,
                                     double tol) {
    for (double x : grid) model->require_inside(x);
    ConditionReportPair out;
    out.first = run_on_grid("drift-efficiency", grid, tol, [&](double x) {
        const double v = model->diffusion_sq(x, theta, 0);
        return ef_dy(ef, 0, 0.0, x, theta, 1) - model->drift_dalpha(x, theta) / v;
    });
    out.second = run_on_grid("diffusion-efficiency", grid, tol, [&](double x) {
        const double v = model->diffusion_sq(x, theta, 0);
        return ef_dy(ef, 1, 0.0, x, theta, 2) -
               model->diffusion_sq_dbeta(x, theta) / (v * v);
    });
    return out;
}

MartingaleOrderProbe probe_martingale_order(const EstimatingFunction& ef, ModelPtr model,
                                            const ParamPoint& theta, double x,
                                            const std::vector<double>& deltas,
                                            const std::string& engine, std::size_t mc_draws,
                                            std::uint64_t mc_seed) {
    if (deltas.size() < 2)
        throw std::invalid_argument("probe_martingale_order: need at least two deltas");
    const bool exact_engine = engine == "exact";
    if (!exact_engine && engine != "mc")
        throw ConfigError("probe_martingale_order: engine must be exact or mc");
    if (exact_engine && !(model->gaussian_transition && model->exact_moments))
        throw MissingMomentsError(model->name + ": exact probe engine needs a Gaussian "
                                                "transition law");

    MartingaleOrderProbe probe;
    std::vector<double> m1, m2;
    for (double d : deltas) {
        Vec2 mean{0.0, 0.0};
        if (exact_engine) {
            mean.x0 = gaussian_transition_mean(*model, theta, d, x, [&](double y) {
                return ef.eval(d, y, x, theta).x0;
            });
            mean.x1 = gaussian_transition_mean(*model, theta, d, x, [&](double y) {
                return ef.eval(d, y, x, theta).x1;
            });
        } else {
            Philox rng(mc_seed, 0);
            const int substeps = 50;
            const double h = d / substeps;
            const double sqh = std::sqrt(h);
            const bool clamp = std::isfinite(model->interval.lower);
            for (std::size_t i = 0; i < mc_draws; ++i) {
                double z = x;
                for (int s = 0; s < substeps; ++s) {
                    double ze = z;
                    if (clamp && ze < model->interval.lower) ze = model->interval.lower;
                    z += model->drift(ze, theta, 0) * h +
                         model->sigma(ze, theta) * sqh * rng.normal();
                }
                if (clamp && z < model->interval.lower) z = model->interval.lower;
                mean += ef.eval(d, z, x, theta);
            }
            mean = mean * (1.0 / static_cast<double>(mc_draws));
        }
        m1.push_back(std::abs(mean.x0));
        m2.push_back(std::abs(mean.x1));
    }
    probe.g1.means = m1;
    probe.g2.means = m2;

    auto fit = [&](MartingaleOrderProbe::Coordinate& c) {
        const double floor = exact_engine ? 1e-12 : 1e-5;
        bool all_tiny = true;
        for (double v : c.means) all_tiny = all_tiny && v < floor;
        if (all_tiny) {
            c.exact = true;
            return;
        }
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < deltas.size(); ++i) {
            lx.push_back(std::log(deltas[i]));
            ly.push_back(std::log(std::max(c.means[i], 1e-300)));
        }
        c.slope = fit_slope(lx, ly);
    };
    fit(probe.g1);
    fit(probe.g2);
    return probe;
}

IdentityReport verify_expansion_identities(const EstimatingFunction& ef, ModelPtr model,
                             const ParamPoint& theta, const std::vector<double>& grid,
                             int k_max) {
    if (k_max < 0 || k_max > 2)
        throw std::invalid_argument("verify_expansion_identities: k_max in 0..2 (forward stencils degrade "
                                    "beyond that)");
    IdentityReport rep;
    rep.max_residual_per_k.assign(k_max + 1, 0.0);
    const double hd = 1e-3;

    // L^q applied in y to the i-th Delta-derivative of a coordinate of g,
    // evaluated at y = x
    auto Lq_of_dDi = [&](int coord, int i, int q, double x) {
        auto g_at = [&](double dd, double y) {
            const Vec2 g = ef.eval(dd, y, x, theta);
            return coord == 0 ? g.x0 : g.x1;
        };
        auto ddelta_i = [&](double y) {
            switch (i) {
                case 0: return g_at(0.0, y);
                case 1: return d1_forward([&](double dd) { return g_at(dd, y); }, hd);
                default: return d2_forward([&](double dd) { return g_at(dd, y); }, hd);
            }
        };
        if (q == 0) return ddelta_i(x);
        // jet of the y-function via central stencils, then generator powers
        std::vector<double> jet(2 * q + 1);
        for (int k = 0; k <= 2 * q; ++k) {
            const double h = (k <= 2 ? 1e-4 : 1e-3) * (1.0 + std::abs(x));
            jet[k] = k == 0 ? ddelta_i(x) : dn_central(ddelta_i, x, k, h);
        }
        for (int s = 0; s < q; ++s) jet = generator_jet(*model, theta, jet, x);
        return jet[0];
    };

    for (double x : grid) {
        model->require_inside(x);
        for (int k = 0; k <= k_max; ++k) {
            for (int coord = 0; coord < 2; ++coord) {
                double acc = 0.0;
                for (int i = 0; i <= k; ++i)
                    acc += binom_coeff(k, i) * Lq_of_dDi(coord, i, k - i, x);
                rep.max_residual_per_k[k] =
                    std::max(rep.max_residual_per_k[k], std::abs(acc));
            }
        }
    }
    return rep;
}

std::vector<double> default_condition_grid(ModelPtr model, const ParamPoint& theta) {
    return stationary_quantile_grid(std::move(model), theta, 21);
}

}  // namespace hfde
