#include "hfde/estfun.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "hfde/quadrature.hpp"
#include "hfde/stencil.hpp"

namespace hfde {

namespace {

// central theta differences, the default Jacobian path
std::function<Mat2(double, double, double, const ParamPoint&)> fd_jac_of(
    std::function<Vec2(double, double, double, const ParamPoint&)> eval) {
    return [eval = std::move(eval)](double d, double y, double x, const ParamPoint& th) {
        const double ha = 1e-6 * (1.0 + std::abs(th.alpha));
        const double hb = 1e-6 * (1.0 + std::abs(th.beta));
        const Vec2 ap = eval(d, y, x, ParamPoint{th.alpha + ha, th.beta});
        const Vec2 am = eval(d, y, x, ParamPoint{th.alpha - ha, th.beta});
        const Vec2 bp = eval(d, y, x, ParamPoint{th.alpha, th.beta + hb});
        const Vec2 bm = eval(d, y, x, ParamPoint{th.alpha, th.beta - hb});
        Mat2 j;
        j(0, 0) = (ap.x0 - am.x0) / (2 * ha);
        j(1, 0) = (ap.x1 - am.x1) / (2 * ha);
        j(0, 1) = (bp.x0 - bm.x0) / (2 * hb);
        j(1, 1) = (bp.x1 - bm.x1) / (2 * hb);
        return j;
    };
}

const DiffusionModel::ExactMoments& require_moments(const DiffusionModel& m) {
    if (!m.exact_moments)
        throw MissingMomentsError(m.name + ": exact conditional moments unavailable");
    return *m.exact_moments;
}

double binom(int n, int k) { return binom_coeff(n, k); }

}  // namespace

Vec2 eval_G(const EstimatingFunction& ef, const SamplePath& path, const ParamPoint& theta) {
    if (path.values.size() < 2) throw std::invalid_argument("eval_G: path too short");
    if (ef.model)
        for (double v : path.values) ef.model->require_inside(v);
    Vec2 g{0.0, 0.0};
    for (std::size_t i = 1; i < path.values.size(); ++i)
        g += ef.eval(path.delta, path.values[i], path.values[i - 1], theta);
    return g;
}

Mat2 jac_G(const EstimatingFunction& ef, const SamplePath& path, const ParamPoint& theta) {
    if (ef.analytic_jac) {
        Mat2 j;
        for (std::size_t i = 1; i < path.values.size(); ++i) {
            const Mat2 ji = ef.jac_theta(path.delta, path.values[i], path.values[i - 1], theta);
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) j(r, c) += ji(r, c);
        }
        return j;
    }
    const double ha = 1e-6 * (1.0 + std::abs(theta.alpha));
    const double hb = 1e-6 * (1.0 + std::abs(theta.beta));
    const Vec2 ap = eval_G(ef, path, ParamPoint{theta.alpha + ha, theta.beta});
    const Vec2 am = eval_G(ef, path, ParamPoint{theta.alpha - ha, theta.beta});
    const Vec2 bp = eval_G(ef, path, ParamPoint{theta.alpha, theta.beta + hb});
    const Vec2 bm = eval_G(ef, path, ParamPoint{theta.alpha, theta.beta - hb});
    Mat2 j;
    j(0, 0) = (ap.x0 - am.x0) / (2 * ha);
    j(1, 0) = (ap.x1 - am.x1) / (2 * ha);
    j(0, 1) = (bp.x0 - bm.x0) / (2 * hb);
    j(1, 1) = (bp.x1 - bm.x1) / (2 * hb);
    return j;
}

// ---------------------------------------------------------------------------
// expansion moments

double expansion_F(const DiffusionModel& model, const ParamPoint& theta, int kappa,
                   double delta, double x) {
    if (kappa < 2 || kappa > 4)
        throw std::invalid_argument("expansion moments: kappa must be in 2..4");
    std::vector<double> jet(2 * (kappa - 1) + 1, 0.0);
    jet[0] = x;
    if (jet.size() > 1) jet[1] = 1.0;
    double acc = jet[0];
    double fact = 1.0;
    double dpow = 1.0;
    for (int i = 1; i <= kappa - 1; ++i) {
        jet = generator_jet(model, theta, jet, x);
        fact *= i;
        dpow *= delta;
        acc += dpow / fact * jet[0];
    }
    return acc;
}

double expansion_phi(const DiffusionModel& model, const ParamPoint& theta, int kappa,
                     double delta, double x) {
    if (kappa < 2 || kappa > 4)
        throw std::invalid_argument("expansion moments: kappa must be in 2..4");
    const int K = kappa - 1;
    std::vector<double> c(K + 1), d(K + 1);
    std::vector<double> idj(2 * K + 1, 0.0), sqj(2 * K + 1, 0.0);
    idj[0] = x;
    if (idj.size() > 1) idj[1] = 1.0;
    sqj[0] = x * x;
    if (sqj.size() > 1) sqj[1] = 2.0 * x;
    if (sqj.size() > 2) sqj[2] = 2.0;
    c[0] = x;
    d[0] = x * x;
    double fact = 1.0;
    for (int i = 1; i <= K; ++i) {
        idj = generator_jet(model, theta, idj, x);
        sqj = generator_jet(model, theta, sqj, x);
        fact *= i;
        c[i] = idj[0] / fact;
        d[i] = sqj[0] / fact;
    }
    // phi_j = d_j - sum_{a+b=j} c_a c_b, truncated at j = kappa-1
    double phi = 0.0;
    double dpow = 1.0;
    for (int j = 1; j <= K; ++j) {
        dpow *= delta;
        double conv = 0.0;
        for (int a = 0; a <= j; ++a) conv += c[a] * c[j - a];
        phi += dpow * (d[j] - conv);
    }
    return phi;
}

// ---------------------------------------------------------------------------
// quadratic family

EstimatingFunction quadratic_ef(ModelPtr model, const Weight2x2& weights,
                                const MomentSpec& moments, std::string name) {
    if (moments.exact) require_moments(*model);

    auto F_of = [model, moments](double d, double x, const ParamPoint& th) {
        return moments.exact ? model->exact_moments->F(d, x, th)
                             : expansion_F(*model, th, moments.kappa, d, x);
    };
    auto phi_of = [model, moments](double d, double x, const ParamPoint& th) {
        return moments.exact ? model->exact_moments->phi(d, x, th)
                             : expansion_phi(*model, th, moments.kappa, d, x);
    };

    EstimatingFunction ef;
    ef.name = std::move(name);
    ef.model = model;
    ef.kappa = moments.exact ? Kappa::Exact() : Kappa::of(moments.kappa);
    ef.version_note = "second coordinate centered at the conditional variance; weights as given";
    ef.eval = [model, weights, F_of, phi_of](double d, double y, double x,
                                             const ParamPoint& th) {
        const double F = F_of(d, x, th);
        const double h1 = y - F;
        const double h2 = h1 * h1 - phi_of(d, x, th);
        const Mat2 A = weights.A(x, d, th);
        return Vec2{A(0, 0) * h1 + A(0, 1) * h2, A(1, 0) * h1 + A(1, 1) * h2};
    };

    const bool analytic = moments.exact && weights.A_dalpha && weights.A_dbeta &&
                          model->exact_moments->F_dalpha && model->exact_moments->phi_dalpha;
    if (analytic) {
        ef.analytic_jac = true;
        ef.jac_theta = [model, weights](double d, double y, double x, const ParamPoint& th) {
            const auto& em = *model->exact_moments;
            const double F = em.F(d, x, th);
            const double phi = em.phi(d, x, th);
            const double h1 = y - F;
            const double h2 = h1 * h1 - phi;
            const double dFa = em.F_dalpha(d, x, th);
            const double dFb = em.F_dbeta ? em.F_dbeta(d, x, th) : 0.0;
            const double dpa = em.phi_dalpha(d, x, th);
            const double dpb = em.phi_dbeta(d, x, th);
            const double dh1a = -dFa, dh1b = -dFb;
            const double dh2a = -2.0 * h1 * dFa - dpa;
            const double dh2b = -2.0 * h1 * dFb - dpb;
            const Mat2 A = weights.A(x, d, th);
            const Mat2 Aa = weights.A_dalpha(x, d, th);
            const Mat2 Ab = weights.A_dbeta(x, d, th);
            Mat2 j;
            for (int r = 0; r < 2; ++r) {
                j(r, 0) = Aa(r, 0) * h1 + Aa(r, 1) * h2 + A(r, 0) * dh1a + A(r, 1) * dh2a;
                j(r, 1) = Ab(r, 0) * h1 + Ab(r, 1) * h2 + A(r, 0) * dh1b + A(r, 1) * dh2b;
            }
            return j;
        };
    } else {
        ef.jac_theta = fd_jac_of(ef.eval);
    }
    return ef;
}

Weight2x2 efficient_quadratic_weights(ModelPtr model) {
    Weight2x2 w;
    w.A = [model](double x, double, const ParamPoint& th) {
        const double v = model->diffusion_sq(x, th, 0);
        return Mat2::diag(model->drift_dalpha(x, th) / v,
                          0.5 * model->diffusion_sq_dbeta(x, th) / (v * v));
    };
    if (model->drift_dalpha2 && model->diffusion_sq_dbeta2) {
        w.A_dalpha = [model](double x, double, const ParamPoint& th) {
            const double v = model->diffusion_sq(x, th, 0);
            return Mat2::diag(model->drift_dalpha2(x, th) / v, 0.0);
        };
        w.A_dbeta = [model](double x, double, const ParamPoint& th) {
            const double v = model->diffusion_sq(x, th, 0);
            const double dv = model->diffusion_sq_dbeta(x, th);
            const double d2v = model->diffusion_sq_dbeta2(x, th);
            const double da1 = -model->drift_dalpha(x, th) * dv / (v * v);
            const double da2 = 0.5 * d2v / (v * v) - dv * dv / (v * v * v);
            return Mat2::diag(da1, da2);
        };
    }
    return w;
}

EstimatingFunction euler_ef(ModelPtr model) {
    EstimatingFunction ef;
    ef.name = "euler";
    ef.model = model;
    ef.kappa = Kappa::of(2);
    ef.version_note =
        "Euler pseudo-score; second coordinate pre-multiplied by Delta (carries the 1/2)";
    ef.eval = [model](double d, double y, double x, const ParamPoint& th) {
        const double b = model->drift(x, th, 0);
        const double v = model->diffusion_sq(x, th, 0);
        const double r = y - x - b * d;
        const double w1 = model->drift_dalpha(x, th) / v;
        const double w2 = 0.5 * model->diffusion_sq_dbeta(x, th) / (v * v);
        return Vec2{w1 * r, w2 * (r * r - v * d)};
    };
    if (model->drift_dalpha2 && model->diffusion_sq_dbeta2) {
        ef.analytic_jac = true;
        ef.jac_theta = [model](double d, double y, double x, const ParamPoint& th) {
            const double b = model->drift(x, th, 0);
            const double v = model->diffusion_sq(x, th, 0);
            const double db_a = model->drift_dalpha(x, th);
            const double db_aa = model->drift_dalpha2(x, th);
            const double dv_b = model->diffusion_sq_dbeta(x, th);
            const double dv_bb = model->diffusion_sq_dbeta2(x, th);
            const double r = y - x - b * d;
            const double w1 = db_a / v;
            const double w2 = 0.5 * dv_b / (v * v);
            const double dw1_a = db_aa / v;
            const double dw1_b = -db_a * dv_b / (v * v);
            const double dw2_b = 0.5 * dv_bb / (v * v) - dv_b * dv_b / (v * v * v);
            Mat2 j;
            j(0, 0) = dw1_a * r - w1 * d * db_a;
            j(0, 1) = dw1_b * r;
            j(1, 0) = w2 * 2.0 * r * (-d * db_a);
            j(1, 1) = dw2_b * (r * r - v * d) - w2 * d * dv_b;
            return j;
        };
    } else {
        ef.jac_theta = fd_jac_of(ef.eval);
    }
    return ef;
}

EstimatingFunction gh_optimal_quadratic(ModelPtr model) {
    const auto& em = require_moments(*model);
    if (!em.F_dalpha || !em.phi_dbeta)
        throw MissingMomentsError(model->name + ": moment parameter partials unavailable");

    Weight2x2 w;
    w.A = [model](double x, double d, const ParamPoint& th) {
        const auto& em = *model->exact_moments;
        if (d <= 0.0) {
            const double v = model->diffusion_sq(x, th, 0);
            return Mat2::diag(model->drift_dalpha(x, th) / v,
                              0.5 * model->diffusion_sq_dbeta(x, th) / (v * v));
        }
        const double phi = em.phi(d, x, th);
        return Mat2::diag(em.F_dalpha(d, x, th) / phi,
                          0.5 * d * em.phi_dbeta(d, x, th) / (phi * phi));
    };
    auto ef = quadratic_ef(model, w, MomentSpec::Exact(), "gh-quadratic");
    ef.kappa = Kappa::Exact();
    ef.version_note =
        "Godambe-Heyde optimal quadratic; second coordinate multiplied by Delta/2";
    // weight partials are not wired analytically; keep the FD Jacobian
    ef.analytic_jac = false;
    ef.jac_theta = fd_jac_of(ef.eval);
    return ef;
}

EstimatingFunction local_gaussian_score_ef(ModelPtr model) {
    // k = int 1/sigma, m = int b/sigma^2 and their parameter partials; closed
    // forms for builtins, quadrature from the anchor otherwise
    std::function<double(double, const ParamPoint&)> k, k_db, m_da, m_db;
    if (model->score_integrals) {
        const auto& si = *model->score_integrals;
        k = si.k;
        k_db = si.k_dbeta;
        m_da = si.m_dalpha;
        m_db = si.m_dbeta;
    } else {
        k = [model](double x, const ParamPoint& th) {
            return integrate_relative(
                [&](double z) { return 1.0 / model->sigma(z, th); }, model->anchor, x, 1e-10);
        };
        k_db = [model, k](double x, const ParamPoint& th) {
            const double h = 1e-6 * (1.0 + std::abs(th.beta));
            return (k(x, ParamPoint{th.alpha, th.beta + h}) -
                    k(x, ParamPoint{th.alpha, th.beta - h})) /
                   (2 * h);
        };
        auto m_fn = [model](double x, const ParamPoint& th) {
            return integrate_relative(
                [&](double z) { return model->drift(z, th, 0) / model->diffusion_sq(z, th, 0); },
                model->anchor, x, 1e-10);
        };
        m_da = [m_fn](double x, const ParamPoint& th) {
            const double h = 1e-6 * (1.0 + std::abs(th.alpha));
            return (m_fn(x, ParamPoint{th.alpha + h, th.beta}) -
                    m_fn(x, ParamPoint{th.alpha - h, th.beta})) /
                   (2 * h);
        };
        m_db = [m_fn](double x, const ParamPoint& th) {
            const double h = 1e-6 * (1.0 + std::abs(th.beta));
            return (m_fn(x, ParamPoint{th.alpha, th.beta + h}) -
                    m_fn(x, ParamPoint{th.alpha, th.beta - h})) /
                   (2 * h);
        };
    }

    // first-coordinate Delta correction: the leading term integral m_alpha(y)
    // - m_alpha(x) alone is a martingale only to order one; the expansion
    // identities force the correction's diagonal value -L(d_alpha m)(x), which
    // restores order two without touching any Delta = 0 condition
    auto c1 = [model](double x, const ParamPoint& th) {
        auto q = [&](double z) {
            return model->drift_dalpha(z, th) / model->diffusion_sq(z, th, 0);
        };
        const double h = 1e-5 * (1.0 + std::abs(x));
        const double qp = (-q(x + 2 * h) + 8 * q(x + h) - 8 * q(x - h) + q(x - 2 * h)) /
                          (12 * h);
        return -(model->drift(x, th, 0) * q(x) +
                 0.5 * model->diffusion_sq(x, th, 0) * qp);
    };

    EstimatingFunction ef;
    ef.name = "local-gaussian";
    ef.model = model;
    ef.kappa = Kappa::of(2);
    ef.version_note = "pseudo-score of the local Gaussian density; g2 multiplied by Delta";
    ef.eval = [model, k, k_db, m_da, m_db, c1](double d, double y, double x,
                                               const ParamPoint& th) {
        double g1 = m_da(y, th) - m_da(x, th);
        double g2 = -(k(y, th) - k(x, th)) * (k_db(y, th) - k_db(x, th));
        if (d > 0.0) {
            const double vy = model->diffusion_sq(y, th, 0);
            const double vx = model->diffusion_sq(x, th, 0);
            const double dvy = model->diffusion_sq_dbeta(y, th);
            const double dvx = model->diffusion_sq_dbeta(x, th);
            g1 += d * c1(x, th);
            g2 += d * (m_db(y, th) - m_db(x, th) - 0.75 * dvy / vy + 0.25 * dvx / vx);
        }
        return Vec2{g1, g2};
    };
    ef.jac_theta = fd_jac_of(ef.eval);
    return ef;
}

EstimatingFunction non_rate_optimal_ef(ModelPtr model,
                                       std::function<double(double, const ParamPoint&)> a1,
                                       std::function<double(double, const ParamPoint&)> a2,
                                       std::string name) {
    require_moments(*model);
    EstimatingFunction ef;
    ef.name = std::move(name);
    ef.model = model;
    ef.kappa = Kappa::Exact();
    ef.version_note = "uncentered second moment; violates the rate-optimality condition";
    ef.eval = [model, a1 = std::move(a1), a2 = std::move(a2)](double d, double y, double x,
                                                              const ParamPoint& th) {
        const auto& em = *model->exact_moments;
        const double F = em.F(d, x, th);
        const double phi = em.phi(d, x, th);
        return Vec2{a1(x, th) * (y - F), a2(x, th) * (y * y - (phi + F * F))};
    };
    ef.jac_theta = fd_jac_of(ef.eval);
    return ef;
}

// ---------------------------------------------------------------------------
// basis machinery

BasisFunctions BasisFunctions::polynomials(std::vector<std::vector<double>> coeffs) {
    BasisFunctions b;
    b.n = static_cast<int>(coeffs.size());
    b.max_dx = 8;
    b.eval = [coeffs = std::move(coeffs)](int j, double x, const ParamPoint&, int order) {
        const auto& c = coeffs.at(j);
        double acc = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) {
            if (static_cast<int>(k) < order) break;
            double term = c[k];
            for (int q = 0; q < order; ++q) term *= static_cast<double>(k - q);
            acc += term * std::pow(x, static_cast<int>(k) - order);
        }
        return acc;
    };
    return b;
}

WeightMatrixN efficient_weights(ModelPtr model, const BasisFunctions& basis,
                                std::function<double(double, const ParamPoint&)> c) {
    if (basis.n != 2)
        throw std::invalid_argument("efficient_weights: needs exactly two basis functions");
    WeightMatrixN w;
    w.n = 2;
    w.rows = [model, basis, c](double x, double, const ParamPoint& th) {
        Mat2 M;
        for (int j = 0; j < 2; ++j) {
            M(j, 0) = basis.eval(j, x, th, 1);
            M(j, 1) = basis.eval(j, x, th, 2);
        }
        const double scale = M.inf_norm();
        if (std::abs(M.det()) <= 1e-12 * scale * scale)
            throw SingularBasisError("efficient_weights: M(x) singular at x = " +
                                     std::to_string(x));
        const Mat2 Minv = M.inverse();
        const double v = model->diffusion_sq(x, th, 0);
        const Vec2 top{model->drift_dalpha(x, th) / v, c ? c(x, th) : 0.0};
        const Vec2 bot{0.0, model->diffusion_sq_dbeta(x, th) / (v * v)};
        const Vec2 r0 = row_times(top, Minv);
        const Vec2 r1 = row_times(bot, Minv);
        return std::vector<double>{r0.x0, r0.x1, r1.x0, r1.x1};
    };
    return w;
}

double gaussian_transition_mean(const DiffusionModel& model, const ParamPoint& theta,
                                double delta, double x,
                                const std::function<double(double)>& h) {
    if (!model.gaussian_transition || !model.exact_moments)
        throw MissingMomentsError(model.name + ": no Gaussian transition law");
    if (delta <= 0.0) return h(x);
    const auto& em = *model.exact_moments;
    const double F = em.F(delta, x, theta);
    const double s = std::sqrt(em.phi(delta, x, theta));
    // E h(F + s Z) with standard normal Z
    static const double inv_sqrt_2pi = 0.3989422804014326779399461;
    auto integrand = [&](double z) { return h(F + s * z) * inv_sqrt_2pi * std::exp(-0.5 * z * z); };
    const double rough = integrate_adaptive(
        [&](double z) { return std::abs(integrand(z)); }, -9.0, 9.0, 1e-6);
    const double tol = 1e-13 * std::max(rough, 1e-12);
    return integrate_adaptive(integrand, -9.0, 9.0, tol);
}

namespace {

struct GhContext {
    ModelPtr model;
    BasisFunctions basis;
    bool exact_engine = false;
    int expansion_terms = 3;  // generator powers used by the expansion engine

    // pi^{engine} f_j(x) at the given theta
    double pi_basis(int j, double x, double delta, const ParamPoint& th) const {
        if (delta <= 0.0) return basis.eval(j, x, th, 0);
        if (exact_engine)
            return gaussian_transition_mean(*model, th, delta, x,
                                            [&](double y) { return basis.eval(j, y, th, 0); });
        std::vector<double> jet(2 * expansion_terms + 1);
        for (int k = 0; k < static_cast<int>(jet.size()); ++k) jet[k] = basis.eval(j, x, th, k);
        double acc = jet[0];
        double fact = 1.0, dpow = 1.0;
        for (int i = 1; i <= expansion_terms; ++i) {
            jet = generator_jet(*model, th, jet, x);
            fact *= i;
            dpow *= delta;
            acc += dpow / fact * jet[0];
        }
        return acc;
    }
};

Mat2 adj2(const Mat2& a) {
    return Mat2{{{a(1, 1), -a(0, 1)}, {-a(1, 0), a(0, 0)}}};
}

// mixed 2x2 determinant term: det(A + tB) = det A + t m(A,B) + t^2 det B
double det_mixed(const Mat2& a, const Mat2& b) {
    return a(0, 0) * b(1, 1) + b(0, 0) * a(1, 1) - a(0, 1) * b(1, 0) - b(0, 1) * a(1, 0);
}

// Continuous Delta -> 0 limit of diag(1, Delta) A*(x, Delta) for N = 2, by
// second-order perturbation of the linear system: with C = D C1 + D^2 C2 +
// D^3 C3 and RHS = D R1 + D^2 R2, the limit rows are R1_beta P and
// R1_alpha Q + R2_alpha P where P, Q are the pole coefficients of C^{-1}.
std::vector<double> gh_limit_weights(const DiffusionModel& model, const BasisFunctions& basis,
                                     double x, const ParamPoint& th) {
    if (basis.n != 2)
        throw std::invalid_argument("gh_optimal_general: the Delta = 0 limit supports N = 2");
    if (basis.max_dx < 6)
        throw std::invalid_argument(
            "gh_optimal_general: Delta = 0 limit needs basis x-derivatives up to order 6");

    // jets of f_j and of the products f_i f_j to order 6, then generator powers
    auto f_jet = [&](int j, const ParamPoint& t) {
        std::vector<double> jet(7);
        for (int k = 0; k < 7; ++k) jet[k] = basis.eval(j, x, t, k);
        return jet;
    };
    auto L_values = [&](std::vector<double> jet, const ParamPoint& t) {
        // returns {h, Lh, L^2 h, L^3 h} at x
        std::vector<double> out{jet[0]};
        for (int q = 1; q <= 3; ++q) {
            jet = generator_jet(model, t, jet, x);
            out.push_back(jet[0]);
        }
        return out;
    };

    std::vector<std::vector<double>> Lf(2);
    for (int j = 0; j < 2; ++j) Lf[j] = L_values(f_jet(j, th), th);

    auto prod_jet = [&](int i, int j) {
        std::vector<double> ji = f_jet(i, th), jj = f_jet(j, th), p(7);
        for (int k = 0; k < 7; ++k) {
            double acc = 0.0;
            for (int l = 0; l <= k; ++l) acc += binom(k, l) * ji[l] * jj[k - l];
            p[k] = acc;
        }
        return p;
    };

    Mat2 C1, C2, C3;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const auto Lp = L_values(prod_jet(i, j), th);
            C1(i, j) = Lp[1] - Lf[i][0] * Lf[j][1] - Lf[j][0] * Lf[i][1];
            C2(i, j) = 0.5 * Lp[2] - 0.5 * (Lf[i][0] * Lf[j][2] + Lf[j][0] * Lf[i][2]) -
                       Lf[i][1] * Lf[j][1];
            C3(i, j) = Lp[3] / 6.0 - (Lf[i][0] * Lf[j][3] + Lf[j][0] * Lf[i][3]) / 6.0 -
                       0.5 * (Lf[i][1] * Lf[j][2] + Lf[i][2] * Lf[j][1]);
        }

    // R1, R2 rows by central theta differences of L^q f minus L^q of the
    // theta-derivative of f
    auto theta_rows = [&](bool alpha_row) {
        const double h = 1e-6 * (1.0 + std::abs(alpha_row ? th.alpha : th.beta));
        ParamPoint tp = th, tm = th;
        (alpha_row ? tp.alpha : tp.beta) += h;
        (alpha_row ? tm.alpha : tm.beta) -= h;
        Vec2 r1, r2;
        for (int j = 0; j < 2; ++j) {
            const auto Lp = L_values(f_jet(j, tp), tp);
            const auto Lm = L_values(f_jet(j, tm), tm);
            std::vector<double> djet(7);
            for (int k = 0; k < 7; ++k)
                djet[k] = (basis.eval(j, x, tp, k) - basis.eval(j, x, tm, k)) / (2 * h);
            const auto Ld = L_values(djet, th);
            const double r1j = (Lp[1] - Lm[1]) / (2 * h) - Ld[1];
            const double r2j = 0.5 * ((Lp[2] - Lm[2]) / (2 * h) - Ld[2]);
            (j == 0 ? r1.x0 : r1.x1) = r1j;
            (j == 0 ? r2.x0 : r2.x1) = r2j;
        }
        return std::make_pair(r1, r2);
    };
    const auto [r1a, r2a] = theta_rows(true);
    const auto [r1b, r2b] = theta_rows(false);
    (void)r2b;

    const double d1 = det_mixed(C1, C2);
    const double scale = std::max(C1.inf_norm() * C2.inf_norm(), 1e-300);
    if (std::abs(d1) <= 1e-10 * scale)
        throw SingularBasisError("gh_optimal_general: singular limit system (affinely "
                                 "dependent basis?)");
    const double d2 = C2.det() + det_mixed(C1, C3);
    const Mat2 P = adj2(C1) * (1.0 / d1);
    const Mat2 Q = adj2(C2) * (1.0 / d1) - adj2(C1) * (d2 / (d1 * d1));

    const Vec2 row2 = row_times(r1b, P);
    const Vec2 row1 = row_times(r1a, Q) + row_times(r2a, P);
    return {row1.x0, row1.x1, row2.x0, row2.x1};
}

}  // namespace

WeightMatrixN gh_optimal_general(ModelPtr model, const BasisFunctions& basis,
                                 const std::string& engine) {
    if (basis.n < 2)
        throw std::invalid_argument("gh_optimal_general: needs at least two basis functions");
    const bool exact = engine == "exact";
    if (!exact && engine != "expansion")
        throw ConfigError("gh_optimal_general: engine must be exact or expansion");
    if (exact && (!model->gaussian_transition || !model->exact_moments))
        throw MissingMomentsError(model->name + ": exact Godambe-Heyde engine needs a "
                                               "Gaussian transition law");

    struct Cache {
        std::map<std::tuple<long long, double, double, double>, std::vector<double>> map;
        std::mutex mutex;
    };
    auto cache = std::make_shared<Cache>();
    auto ctx = std::make_shared<GhContext>();
    ctx->model = model;
    ctx->basis = basis;
    ctx->exact_engine = exact;

    WeightMatrixN w;
    w.n = basis.n;
    w.rows = [model, basis, ctx, cache, exact](double x, double delta, const ParamPoint& th) {
        const long long xr = static_cast<long long>(std::llround(x * 1e12));
        const auto key = std::make_tuple(xr, delta, th.alpha, th.beta);
        {
            std::lock_guard<std::mutex> lock(cache->mutex);
            auto it = cache->map.find(key);
            if (it != cache->map.end()) return it->second;
        }

        const int N = basis.n;
        std::vector<double> rows(2 * N, 0.0);
        if (delta > 0.0) {
            // C_ij = pi(f_i f_j) - pi f_i pi f_j
            std::vector<double> C(N * N, 0.0);
            std::vector<double> pif(N);
            for (int j = 0; j < N; ++j) pif[j] = ctx->pi_basis(j, x, delta, th);
            if (exact) {
                for (int i = 0; i < N; ++i)
                    for (int j = i; j < N; ++j) {
                        auto prod = [&](double y) {
                            return basis.eval(i, y, th, 0) * basis.eval(j, y, th, 0);
                        };
                        const double pij =
                            gaussian_transition_mean(*model, th, delta, x, prod);
                        C[i * N + j] = C[j * N + i] = pij - pif[i] * pif[j];
                    }
            } else {
                const int K = ctx->expansion_terms;
                // product jets by Leibniz, then the generator expansion
                for (int i = 0; i < N; ++i)
                    for (int j = i; j < N; ++j) {
                        std::vector<double> pjet(2 * K + 1, 0.0);
                        for (int k = 0; k < static_cast<int>(pjet.size()); ++k) {
                            double acc = 0.0;
                            for (int l = 0; l <= k; ++l)
                                acc += binom(k, l) * basis.eval(i, x, th, l) *
                                       basis.eval(j, x, th, k - l);
                            pjet[k] = acc;
                        }
                        double acc = pjet[0];
                        double fact = 1.0, dpow = 1.0;
                        std::vector<double> jet = pjet;
                        for (int q = 1; q <= K; ++q) {
                            jet = generator_jet(*model, th, jet, x);
                            fact *= q;
                            dpow *= delta;
                            acc += dpow / fact * jet[0];
                        }
                        C[i * N + j] = C[j * N + i] = acc - pif[i] * pif[j];
                    }
            }
            // RHS rows by central theta differences of pi f - pi d_theta f
            auto rhs_row = [&](bool alpha_row) {
                const double h = 1e-6 * (1.0 + std::abs(alpha_row ? th.alpha : th.beta));
                ParamPoint tp = th, tm = th;
                (alpha_row ? tp.alpha : tp.beta) += h;
                (alpha_row ? tm.alpha : tm.beta) -= h;
                std::vector<double> r(N);
                for (int j = 0; j < N; ++j) {
                    const double dpi =
                        (ctx->pi_basis(j, x, delta, tp) - ctx->pi_basis(j, x, delta, tm)) /
                        (2 * h);
                    // pi_theta applied to the theta-derivative of f_j
                    double pidf = 0.0;
                    if (exact) {
                        auto dfj = [&](double y) {
                            return (basis.eval(j, y, tp, 0) - basis.eval(j, y, tm, 0)) / (2 * h);
                        };
                        pidf = gaussian_transition_mean(*model, th, delta, x, dfj);
                    } else {
                        const int K = ctx->expansion_terms;
                        std::vector<double> jet(2 * K + 1);
                        for (int k = 0; k < static_cast<int>(jet.size()); ++k)
                            jet[k] =
                                (basis.eval(j, x, tp, k) - basis.eval(j, x, tm, k)) / (2 * h);
                        double acc = jet[0];
                        double fact = 1.0, dpow = 1.0;
                        for (int q = 1; q <= K; ++q) {
                            jet = generator_jet(*model, th, jet, x);
                            fact *= q;
                            dpow *= delta;
                            acc += dpow / fact * jet[0];
                        }
                        pidf = acc;
                    }
                    r[j] = dpi - pidf;
                }
                return r;
            };
            const auto ra = rhs_row(true);
            const auto rb = rhs_row(false);
            // solve A* C = RHS row-wise (C symmetric)
            std::vector<double> c1 = C, b1 = ra;
            if (!gauss_solve(c1, b1, static_cast<std::size_t>(N)))
                throw SingularBasisError(
                    "gh_optimal_general: singular conditional covariance (affinely "
                    "dependent basis?)");
            std::vector<double> c2 = C, b2 = rb;
            if (!gauss_solve(c2, b2, static_cast<std::size_t>(N)))
                throw SingularBasisError("gh_optimal_general: singular conditional covariance");
            for (int j = 0; j < N; ++j) {
                rows[j] = b1[j];                  // row 1 = A*_1
                rows[N + j] = delta * b2[j];      // row 2 = Delta A*_2
            }
        } else {
            rows = gh_limit_weights(*model, basis, x, th);
        }
        std::lock_guard<std::mutex> lock(cache->mutex);
        cache->map[key] = rows;
        return rows;
    };
    return w;
}

EstimatingFunction basis_ef(ModelPtr model, const BasisFunctions& basis,
                            const WeightMatrixN& weights, const MomentSpec& moments,
                            std::string name) {
    if (moments.exact) {
        require_moments(*model);
        if (!model->gaussian_transition)
            throw MissingMomentsError(model->name +
                                      ": exact basis bracket needs a Gaussian transition law");
    }
    EstimatingFunction ef;
    ef.name = std::move(name);
    ef.model = model;
    ef.kappa = moments.exact ? Kappa::Exact() : Kappa::of(moments.kappa);
    ef.version_note = "basis form A(x,Delta)[f(y) - pi f(x)]";
    const int N = basis.n;

    // pi f(x) is y-free; cache it so y-sweeps at fixed x (stencils, outer
    // quadratures, data passes over repeated states) pay for it once
    struct PifCache {
        std::map<std::tuple<long long, double, double, double>, std::vector<double>> map;
        std::mutex mutex;
    };
    auto cache = std::make_shared<PifCache>();

    ef.eval = [model, basis, weights, moments, N, cache](double d, double y, double x,
                                                         const ParamPoint& th) {
        const auto rows = weights.rows(x, d, th);
        const auto key = std::make_tuple(static_cast<long long>(std::llround(x * 1e12)), d,
                                         th.alpha, th.beta);
        std::vector<double> pif;
        {
            std::lock_guard<std::mutex> lock(cache->mutex);
            auto it = cache->map.find(key);
            if (it != cache->map.end()) pif = it->second;
        }
        if (pif.empty()) {
            pif.resize(N);
            for (int j = 0; j < N; ++j) {
                if (d <= 0.0) {
                    pif[j] = basis.eval(j, x, th, 0);
                } else if (moments.exact) {
                    pif[j] = gaussian_transition_mean(*model, th, d, x, [&](double z) {
                        return basis.eval(j, z, th, 0);
                    });
                } else {
                    std::vector<double> jet(2 * (moments.kappa - 1) + 1);
                    for (int k = 0; k < static_cast<int>(jet.size()); ++k)
                        jet[k] = basis.eval(j, x, th, k);
                    double acc = jet[0];
                    double fact = 1.0, dpow = 1.0;
                    for (int q = 1; q <= moments.kappa - 1; ++q) {
                        jet = generator_jet(*model, th, jet, x);
                        fact *= q;
                        dpow *= d;
                        acc += dpow / fact * jet[0];
                    }
                    pif[j] = acc;
                }
            }
            std::lock_guard<std::mutex> lock(cache->mutex);
            cache->map[key] = pif;
        }
        Vec2 g{0.0, 0.0};
        for (int j = 0; j < N; ++j) {
            const double br = basis.eval(j, y, th, 0) - pif[j];
            g.x0 += rows[j] * br;
            g.x1 += rows[N + j] * br;
        }
        return g;
    };
    ef.jac_theta = fd_jac_of(ef.eval);
    return ef;
}

// ---------------------------------------------------------------------------
// catalog

EstimatingFunction catalog_ef(const std::string& name, ModelPtr model) {
    if (name == "quad-exact-efficient")
        return quadratic_ef(model, efficient_quadratic_weights(model), MomentSpec::Exact(),
                            "quad-exact-efficient");
    if (name == "quad-expansion-k2")
        return quadratic_ef(model, efficient_quadratic_weights(model), MomentSpec::Expansion(2),
                            "quad-expansion-k2");
    if (name == "quad-expansion-k3")
        return quadratic_ef(model, efficient_quadratic_weights(model), MomentSpec::Expansion(3),
                            "quad-expansion-k3");
    if (name == "euler") return euler_ef(model);
    if (name == "gh-quadratic") return gh_optimal_quadratic(model);
    if (name == "gh-general") {
        auto basis = BasisFunctions::polynomials({{0.0, 1.0}, {0.0, 0.0, 1.0}});
        const bool exact = model->gaussian_transition && model->exact_moments.has_value();
        auto w = gh_optimal_general(model, basis, exact ? "exact" : "expansion");
        return basis_ef(model, basis, w,
                        exact ? MomentSpec::Exact() : MomentSpec::Expansion(3), "gh-general");
    }
    if (name == "local-gaussian") return local_gaussian_score_ef(model);
    if (name == "non-rate-control") {
        // a1 must not be proportional to a2 * x: that exceptional class admits
        // a rate-optimal version (a linear recombination recenters the second
        // moment) and the control would silently estimate at the fast rate
        auto a1 = [](double x, const ParamPoint&) { return x * x * x; };
        auto a2 = [](double, const ParamPoint&) { return 1.0; };
        return non_rate_optimal_ef(model, a1, a2, "non-rate-control");
    }
    throw ConfigError("unknown estimator: " + name);
}

std::vector<std::string> catalog_names() {
    return {"quad-exact-efficient", "quad-expansion-k2", "euler",   "gh-quadratic",
            "gh-general",           "local-gaussian",    "non-rate-control"};
}

}  // namespace hfde
