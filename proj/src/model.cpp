#include "hfde/model.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <mutex>

#include "hfde/quadrature.hpp"
#include "hfde/stencil.hpp"

namespace hfde {

ScalarField ScalarField::polynomial(std::vector<double> coeffs) {
    ScalarField f;
    f.declared_order = 8;
    f.eval = [c = std::move(coeffs)](double x, int order) {
        double acc = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) {
            if (static_cast<int>(k) < order) break;
            double term = c[k];
            for (int j = 0; j < order; ++j) term *= static_cast<double>(k - j);
            acc += term * std::pow(x, static_cast<int>(k) - order);
        }
        return acc;
    };
    return f;
}

ScalarField ScalarField::from_function(std::function<double(double)> fn, int declared_order) {
    ScalarField f;
    f.declared_order = declared_order;
    f.eval = [fn = std::move(fn)](double x, int order) {
        if (order == 0) return fn(x);
        return dn_central(fn, x, order, fd_step_x(x, order));
    };
    return f;
}

// ---------------------------------------------------------------------------
// builtins

namespace {

ModelPtr make_ou() {
    auto m = std::make_shared<DiffusionModel>();
    m->name = "ou";
    m->interval = StateInterval{-std::numeric_limits<double>::infinity(),
                                std::numeric_limits<double>::infinity()};
    m->anchor = 0.0;
    m->gaussian_transition = true;
    m->drift = [](double x, const ParamPoint& th, int k) {
        switch (k) {
            case 0: return -th.alpha * x;
            case 1: return -th.alpha;
            default: return 0.0;
        }
    };
    m->diffusion_sq = [](double, const ParamPoint& th, int k) {
        return k == 0 ? th.beta * th.beta : 0.0;
    };
    m->drift_dalpha = [](double x, const ParamPoint&) { return -x; };
    m->diffusion_sq_dbeta = [](double, const ParamPoint& th) { return 2.0 * th.beta; };
    m->drift_dalpha2 = [](double, const ParamPoint&) { return 0.0; };
    m->diffusion_sq_dbeta2 = [](double, const ParamPoint&) { return 2.0; };
    m->drift_over_v_integral = [](double x, const ParamPoint& th) {
        return -th.alpha * x * x / (2.0 * th.beta * th.beta);
    };

    DiffusionModel::ExactMoments em;
    em.F = [](double d, double x, const ParamPoint& th) { return x * std::exp(-th.alpha * d); };
    em.F_dalpha = [](double d, double x, const ParamPoint& th) {
        return -d * x * std::exp(-th.alpha * d);
    };
    em.F_dbeta = [](double, double, const ParamPoint&) { return 0.0; };
    em.phi = [](double d, double x, const ParamPoint& th) {
        (void)x;
        return th.beta * th.beta * (1.0 - std::exp(-2.0 * th.alpha * d)) / (2.0 * th.alpha);
    };
    em.phi_dalpha = [](double d, double x, const ParamPoint& th) {
        (void)x;
        const double e = std::exp(-2.0 * th.alpha * d);
        const double a = th.alpha;
        return th.beta * th.beta * (2.0 * a * d * e - (1.0 - e)) / (2.0 * a * a);
    };
    em.phi_dbeta = [](double d, double x, const ParamPoint& th) {
        (void)x;
        return th.beta * (1.0 - std::exp(-2.0 * th.alpha * d)) / th.alpha;
    };
    m->exact_moments = std::move(em);

    DiffusionModel::ScoreIntegrals si;
    si.k = [](double x, const ParamPoint& th) { return x / th.beta; };
    si.k_dbeta = [](double x, const ParamPoint& th) { return -x / (th.beta * th.beta); };
    si.m = [](double x, const ParamPoint& th) {
        return -th.alpha * x * x / (2.0 * th.beta * th.beta);
    };
    si.m_dalpha = [](double x, const ParamPoint& th) {
        return -x * x / (2.0 * th.beta * th.beta);
    };
    si.m_dbeta = [](double x, const ParamPoint& th) {
        return th.alpha * x * x / (th.beta * th.beta * th.beta);
    };
    m->score_integrals = std::move(si);
    return m;
}

ModelPtr make_cir(double m0) {
    if (!(m0 > 0.0)) throw ConfigError("cir: long-run mean m0 must be > 0");
    auto m = std::make_shared<DiffusionModel>();
    m->name = "cir";
    m->interval = StateInterval{0.0, std::numeric_limits<double>::infinity()};
    m->anchor = m0;
    m->drift = [m0](double x, const ParamPoint& th, int k) {
        switch (k) {
            case 0: return th.alpha * (m0 - x);
            case 1: return -th.alpha;
            default: return 0.0;
        }
    };
    m->diffusion_sq = [](double x, const ParamPoint& th, int k) {
        switch (k) {
            case 0: return th.beta * th.beta * x;
            case 1: return th.beta * th.beta;
            default: return 0.0;
        }
    };
    m->drift_dalpha = [m0](double x, const ParamPoint&) { return m0 - x; };
    m->diffusion_sq_dbeta = [](double x, const ParamPoint& th) { return 2.0 * th.beta * x; };
    m->drift_dalpha2 = [](double, const ParamPoint&) { return 0.0; };
    m->diffusion_sq_dbeta2 = [](double x, const ParamPoint&) { return 2.0 * x; };
    m->drift_over_v_integral = [m0](double x, const ParamPoint& th) {
        // int_m0^x alpha (m0 - y) / (beta^2 y) dy
        const double b2 = th.beta * th.beta;
        return th.alpha / b2 * (m0 * std::log(x / m0) - (x - m0));
    };

    DiffusionModel::ScoreIntegrals si;
    si.k = [](double x, const ParamPoint& th) { return 2.0 * std::sqrt(x) / th.beta; };
    si.k_dbeta = [](double x, const ParamPoint& th) {
        return -2.0 * std::sqrt(x) / (th.beta * th.beta);
    };
    si.m = [m0](double x, const ParamPoint& th) {
        const double b2 = th.beta * th.beta;
        return th.alpha / b2 * (m0 * std::log(x) - x);
    };
    si.m_dalpha = [m0](double x, const ParamPoint& th) {
        const double b2 = th.beta * th.beta;
        return (m0 * std::log(x) - x) / b2;
    };
    si.m_dbeta = [m0](double x, const ParamPoint& th) {
        const double b3 = th.beta * th.beta * th.beta;
        return -2.0 * th.alpha * (m0 * std::log(x) - x) / b3;
    };
    m->score_integrals = std::move(si);
    return m;
}

}  // namespace

ModelPtr builtin_model(const std::string& name, double fixed_m0) {
    if (name == "ou") return make_ou();
    if (name == "cir") return make_cir(fixed_m0);
    throw ConfigError("unknown builtin model: " + name);
}

ModelPtr make_custom_model(std::string name, std::function<double(double, double)> b_fn,
                           std::function<double(double, double)> sigma_fn,
                           StateInterval interval, double anchor) {
    auto m = std::make_shared<DiffusionModel>();
    m->name = std::move(name);
    m->interval = interval;
    m->anchor = anchor;
    m->drift = [b_fn](double x, const ParamPoint& th, int k) {
        auto g = [&](double z) { return b_fn(z, th.alpha); };
        return k == 0 ? g(x) : dn_central(g, x, k, fd_step_x(x, k));
    };
    m->diffusion_sq = [sigma_fn](double x, const ParamPoint& th, int k) {
        auto g = [&](double z) {
            const double s = sigma_fn(z, th.beta);
            return s * s;
        };
        return k == 0 ? g(x) : dn_central(g, x, k, fd_step_x(x, k));
    };
    m->drift_dalpha = [b_fn](double x, const ParamPoint& th) {
        const double h = 1e-6 * (1.0 + std::abs(th.alpha));
        return (b_fn(x, th.alpha + h) - b_fn(x, th.alpha - h)) / (2.0 * h);
    };
    m->diffusion_sq_dbeta = [sigma_fn](double x, const ParamPoint& th) {
        const double h = 1e-6 * (1.0 + std::abs(th.beta));
        const double sp = sigma_fn(x, th.beta + h);
        const double sm = sigma_fn(x, th.beta - h);
        return (sp * sp - sm * sm) / (2.0 * h);
    };
    return m;
}

// ---------------------------------------------------------------------------
// generator

std::vector<double> generator_jet(const DiffusionModel& model, const ParamPoint& theta,
                                  const std::vector<double>& f_jet, double x) {
    if (f_jet.size() < 3) throw std::invalid_argument("generator_jet: jet too short");
    const int out_len = static_cast<int>(f_jet.size()) - 2;
    std::vector<double> out(out_len);
    // (L f)^(j) = sum_i C(j,i) [ b^(i) f^(j-i+1) + v^(i) f^(j-i+2) / 2 ]
    for (int j = 0; j < out_len; ++j) {
        double acc = 0.0;
        double binom = 1.0;
        for (int i = 0; i <= j; ++i) {
            const double b_i = model.drift(x, theta, i);
            const double v_i = model.diffusion_sq(x, theta, i);
            acc += binom * (b_i * f_jet[j - i + 1] + 0.5 * v_i * f_jet[j - i + 2]);
            binom = binom * (j - i) / (i + 1.0);
        }
        out[j] = acc;
    }
    return out;
}

double apply_generator(const DiffusionModel& model, const ParamPoint& theta,
                       const ScalarField& f, int order, double x) {
    if (order < 1 || order > 3)
        throw std::invalid_argument("apply_generator: order must be in 1..3");
    if (f.declared_order < 2 * order)
        throw std::invalid_argument("apply_generator: field declares too few derivatives");
    model.require_inside(x);
    std::vector<double> jet(2 * order + 1);
    for (int k = 0; k <= 2 * order; ++k) jet[k] = f(x, k);
    for (int s = 0; s < order; ++s) jet = generator_jet(model, theta, jet, x);
    return jet[0];
}

// ---------------------------------------------------------------------------
// stationary law

double StationaryLaw::scale_integral(double x) const {
    if (model_->drift_over_v_integral) return model_->drift_over_v_integral(x, theta_);
    auto integrand = [&](double y) {
        return model_->drift(y, theta_, 0) / model_->diffusion_sq(y, theta_, 0);
    };
    return integrate_relative(integrand, model_->anchor, x, 1e-10);
}

double StationaryLaw::log_unnormalized(double x) const {
    model_->require_inside(x);
    return 2.0 * scale_integral(x) - std::log(model_->diffusion_sq(x, theta_, 0));
}

StationaryLaw::StationaryLaw(ModelPtr model, const ParamPoint& theta)
    : model_(std::move(model)), theta_(theta) {
    if (model_->name == "cir") {
        // ergodicity needs 2 alpha m0 >= beta^2; m0 is the anchor by construction
        const double m0 = model_->anchor;
        if (2.0 * theta.alpha * m0 < theta.beta * theta.beta)
            std::fprintf(stderr,
                         "hfde warning: cir with 2*alpha*m0 < beta^2 touches the boundary; "
                         "stationary-law results are unreliable\n");
    }

    // outward scan from the anchor until the unnormalized density drops below
    // 1e-12 of the running maximum
    const double ln_cut = std::log(1e-12);
    auto scan = [&](int direction) {
        const double limit = direction > 0 ? model_->interval.upper : model_->interval.lower;
        double step = 0.25 * (1.0 + std::abs(model_->anchor));
        double x = model_->anchor;
        double best = log_unnormalized(x);
        log_max_ = std::max(log_max_, best);
        for (int it = 0; it < 400; ++it) {
            double next = x + direction * step;
            if (direction > 0 && next >= limit) next = x + 0.5 * (limit - x);
            if (direction < 0 && next <= limit) next = x + 0.5 * (limit - x);
            const double lu = log_unnormalized(next);
            best = std::max(best, lu);
            log_max_ = std::max(log_max_, best);
            x = next;
            if (lu < best + ln_cut) return x;
            if (std::isfinite(limit) && std::abs(x - limit) < 1e-12 * (1.0 + std::abs(limit)))
                return x;
            step *= 1.3;
        }
        throw QuadratureError("stationary law: tail mass does not decay (Condition on "
                              "ergodicity violated?)");
    };
    log_max_ = log_unnormalized(model_->anchor);
    hi_ = scan(+1);
    lo_ = scan(-1);

    auto unnorm = [&](double x) { return std::exp(log_unnormalized(x) - log_max_); };
    norm_ = integrate_relative(unnorm, lo_, hi_, 1e-10);
    if (!(norm_ > 0.0) || !std::isfinite(norm_))
        throw QuadratureError("stationary law: normalization failed");

    // cumulative table for quantiles
    const int panels = 2048;
    cdf_grid_x_.resize(panels + 1);
    cdf_grid_p_.resize(panels + 1);
    const double w = (hi_ - lo_) / panels;
    double acc = 0.0;
    cdf_grid_x_[0] = lo_;
    cdf_grid_p_[0] = 0.0;
    double f0 = unnorm(lo_);
    for (int i = 0; i < panels; ++i) {
        const double x1 = lo_ + (i + 1) * w;
        const double fm = unnorm(lo_ + (i + 0.5) * w);
        const double f1 = unnorm(x1);
        acc += w / 6.0 * (f0 + 4.0 * fm + f1);
        cdf_grid_x_[i + 1] = x1;
        cdf_grid_p_[i + 1] = acc;
        f0 = f1;
    }
    for (auto& p : cdf_grid_p_) p /= acc;
}

double StationaryLaw::density(double x) const {
    if (!model_->interval.contains(x)) throw DomainError("stationary density: x outside interval");
    return std::exp(log_unnormalized(x) - log_max_) / norm_;
}

double StationaryLaw::expectation(const std::function<double(double)>& h, double rel_tol) const {
    auto integrand = [&](double x) { return h(x) * density(x); };
    return integrate_relative(integrand, lo_, hi_, rel_tol);
}

double StationaryLaw::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile: p in (0,1)");
    auto it = std::lower_bound(cdf_grid_p_.begin(), cdf_grid_p_.end(), p);
    if (it == cdf_grid_p_.begin()) return cdf_grid_x_.front();
    if (it == cdf_grid_p_.end()) return cdf_grid_x_.back();
    const std::size_t i = static_cast<std::size_t>(it - cdf_grid_p_.begin());
    const double p0 = cdf_grid_p_[i - 1], p1 = cdf_grid_p_[i];
    const double x0 = cdf_grid_x_[i - 1], x1 = cdf_grid_x_[i];
    const double t = (p - p0) / std::max(p1 - p0, 1e-300);
    return x0 + t * (x1 - x0);
}

namespace {
struct LawKey {
    const DiffusionModel* model;
    double alpha, beta;
    bool operator<(const LawKey& o) const {
        if (model != o.model) return model < o.model;
        if (alpha != o.alpha) return alpha < o.alpha;
        return beta < o.beta;
    }
};
std::map<LawKey, LawPtr> g_law_cache;
std::mutex g_law_mutex;
}  // namespace

LawPtr stationary_law(ModelPtr model, const ParamPoint& theta) {
    const LawKey key{model.get(), theta.alpha, theta.beta};
    {
        std::lock_guard<std::mutex> lock(g_law_mutex);
        auto it = g_law_cache.find(key);
        if (it != g_law_cache.end()) return it->second;
    }
    auto law = std::make_shared<const StationaryLaw>(model, theta);
    std::lock_guard<std::mutex> lock(g_law_mutex);
    auto [it, inserted] = g_law_cache.emplace(key, law);
    return it->second;  // first writer wins
}

double stationary_density(ModelPtr model, const ParamPoint& theta, double x) {
    return stationary_law(std::move(model), theta)->density(x);
}

double stationary_expectation(ModelPtr model, const ParamPoint& theta, const ScalarField& h) {
    return stationary_law(std::move(model), theta)
        ->expectation([&](double x) { return h(x, 0); });
}

double stationary_expectation(ModelPtr model, const ParamPoint& theta,
                              const std::function<double(double)>& h) {
    return stationary_law(std::move(model), theta)->expectation(h);
}

std::vector<double> stationary_quantile_grid(ModelPtr model, const ParamPoint& theta,
                                             int points) {
    auto law = stationary_law(std::move(model), theta);
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) {
        const double p = 0.025 + 0.95 * i / (points - 1.0);
        grid[i] = law->quantile(p);
    }
    return grid;
}

}  // namespace hfde
