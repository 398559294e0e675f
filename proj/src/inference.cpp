#include "hfde/inference.hpp"

#include <cmath>

#include "hfde/conditions.hpp"
#include "hfde/quadrature.hpp"

namespace hfde {

namespace {

struct SingularSError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace

AsymptoticsReport theoretical_asymptotics(const EstimatingFunction& ef, ModelPtr model,
                                          const ParamPoint& theta, const ParamPoint& theta0) {
    auto law = stationary_law(model, theta0);
    AsymptoticsReport rep;

    // J_theta(x) built from the same y-stencils the condition checkers use
    auto Jt = [&](double x) {
        Mat2 J;
        const double dab = model->drift_dalpha(x, theta);
        const double dvb = 0.5 * model->diffusion_sq_dbeta(x, theta);
        for (int coord = 0; coord < 2; ++coord) {
            J(coord, 0) = dab * ef_dy(ef, coord, 0.0, x, theta, 1);
            J(coord, 1) = dvb * ef_dy(ef, coord, 0.0, x, theta, 2);
        }
        return J;
    };

    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c)
            rep.S(r, c) = law->expectation([&](double x) { return Jt(x)(r, c); });

    for (int r = 0; r < 2; ++r)
        for (int c = r; c < 2; ++c) {
            rep.V(r, c) = law->expectation([&](double x) {
                const double v0 = model->diffusion_sq(x, theta0, 0);
                return v0 * ef_dy(ef, r, 0.0, x, theta, 1) * ef_dy(ef, c, 0.0, x, theta, 1);
            });
            rep.V(c, r) = rep.V(r, c);
        }
    rep.W1 = rep.V(0, 0);
    rep.W2 = 0.5 * law->expectation([&](double x) {
        const double v0 = model->diffusion_sq(x, theta0, 0);
        const double v = model->diffusion_sq(x, theta, 0);
        const double d2 = ef_dy(ef, 1, 0.0, x, theta, 2);
        return (v0 * v0 + 0.5 * (v0 - v) * (v0 - v)) * d2 * d2;
    });

    const double dS = rep.S.det();
    if (std::abs(dS) < 1e-12 * rep.S.inf_norm() * rep.S.inf_norm())
        throw SingularSError("theoretical_asymptotics: S is singular");
    const Mat2 Sinv = rep.S.inverse();
    rep.cov_general = Sinv * rep.V * Sinv.transpose();
    rep.cov_rate_optimal = Mat2::diag(rep.W1 / (rep.S(0, 0) * rep.S(0, 0)),
                                      rep.W2 / (rep.S(1, 1) * rep.S(1, 1)));
    rep.sigma_bound = efficient_bound(model, theta0);
    return rep;
}

EmpiricalCovariance empirical_covariance(const EstimatingFunction& ef, const SamplePath& path,
                                         const ParamPoint& theta_hat, const std::string& mode) {
    if (mode != "general" && mode != "rate-optimal")
        throw ConfigError("empirical_covariance: mode must be general or rate-optimal");
    EmpiricalCovariance out;
    out.mode = mode;
    const std::size_t n = path.n_increments();
    const double nd = static_cast<double>(n) * path.delta;

    Mat2 sum_jac = jac_G(ef, path, theta_hat);
    out.S_hat = sum_jac * (-1.0 / nd);

    Mat2 gg;
    for (std::size_t i = 1; i < path.values.size(); ++i) {
        const Vec2 g = ef.eval(path.delta, path.values[i], path.values[i - 1], theta_hat);
        gg(0, 0) += g.x0 * g.x0;
        gg(0, 1) += g.x0 * g.x1;
        gg(1, 1) += g.x1 * g.x1;
    }
    gg(1, 0) = gg(0, 1);

    if (mode == "general") {
        out.V_or_W_hat = gg * (1.0 / nd);
        const Mat2 Sinv = out.S_hat.inverse();
        out.cov_hat = Sinv * out.V_or_W_hat * Sinv.transpose();
    } else {
        const Mat2 Dn = normalization_Dn(n, path.delta);
        out.V_or_W_hat = Dn * gg * Dn;
        out.cov_hat = Mat2::diag(
            out.V_or_W_hat(0, 0) / (out.S_hat(0, 0) * out.S_hat(0, 0)),
            out.V_or_W_hat(1, 1) / (out.S_hat(1, 1) * out.S_hat(1, 1)));
    }
    return out;
}

std::vector<Vec2> gamma_curve(const EstimatingFunction& ef, ModelPtr model,
                              const ParamPoint& theta0, const std::vector<ParamPoint>& thetas) {
    auto law = stationary_law(model, theta0);
    std::vector<Vec2> out;
    out.reserve(thetas.size());
    for (const auto& th : thetas) {
        Vec2 g;
        for (int coord = 0; coord < 2; ++coord) {
            const double val = law->expectation([&](double x) {
                const double db = model->drift(x, theta0, 0) - model->drift(x, th, 0);
                const double dv =
                    model->diffusion_sq(x, theta0, 0) - model->diffusion_sq(x, th, 0);
                return db * ef_dy(ef, coord, 0.0, x, th, 1) +
                       0.5 * dv * ef_dy(ef, coord, 0.0, x, th, 2);
            });
            (coord == 0 ? g.x0 : g.x1) = val;
        }
        out.push_back(g);
    }
    return out;
}

Mat2 efficient_bound(ModelPtr model, const ParamPoint& theta0) {
    auto law = stationary_law(model, theta0);
    const double info_alpha = law->expectation([&](double x) {
        const double da = model->drift_dalpha(x, theta0);
        return da * da / model->diffusion_sq(x, theta0, 0);
    });
    const double info_beta = law->expectation([&](double x) {
        const double dv = model->diffusion_sq_dbeta(x, theta0);
        const double v = model->diffusion_sq(x, theta0, 0);
        return (dv / v) * (dv / v);
    });
    if (!(info_alpha > 0.0) || !(info_beta > 0.0))
        throw QuadratureError("efficient_bound: zero information (parameter enters "
                              "neither coefficient?)");
    return Mat2::diag(1.0 / info_alpha, 2.0 / info_beta);
}

}  // namespace hfde
