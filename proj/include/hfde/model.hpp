#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfde/linalg.hpp"

namespace hfde {

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParamPoint {
    double alpha = 0.0;
    double beta = 0.0;
};

struct StateInterval {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    bool contains(double x) const { return x > lower && x < upper; }
};

// A scalar function of x with evaluable derivatives. `order` 0 is the value;
// declared_order bounds the derivatives the field promises to deliver.
struct ScalarField {
    int declared_order = 0;
    std::function<double(double x, int order)> eval;

    double operator()(double x, int order = 0) const { return eval(x, order); }

    // Analytic polynomial field: coeffs[k] is the coefficient of x^k.
    static ScalarField polynomial(std::vector<double> coeffs);

    // Wrap a plain function; derivatives by central finite differences.
    static ScalarField from_function(std::function<double(double)> f, int declared_order);
};

// Scalar diffusion dX = b(X;alpha) dt + sigma(X;beta) dW on (lower, upper).
// Coefficient callables expose x-derivatives up to order 4 (analytic for the
// builtins, finite differences for user models).
struct DiffusionModel {
    std::string name;
    StateInterval interval;
    double anchor = 0.0;  // reference point for scale integrals and tail scans
    bool gaussian_transition = false;  // exact transition law is Gaussian (OU)

    // b(x; alpha) and d^k b / dx^k
    std::function<double(double x, const ParamPoint&, int dx_order)> drift;
    // v(x; beta) = sigma^2 and d^k v / dx^k
    std::function<double(double x, const ParamPoint&, int dx_order)> diffusion_sq;

    // parameter partials of the coefficients
    std::function<double(double x, const ParamPoint&)> drift_dalpha;
    std::function<double(double x, const ParamPoint&)> diffusion_sq_dbeta;
    // optional second parameter partials (builtins); empty means unavailable
    std::function<double(double x, const ParamPoint&)> drift_dalpha2;
    std::function<double(double x, const ParamPoint&)> diffusion_sq_dbeta2;

    // optional closed form of int_anchor^x b/v dy (speeds up the stationary law)
    std::function<double(double x, const ParamPoint&)> drift_over_v_integral;

    // optional exact conditional moments F(D,x), phi(D,x) and their partials
    struct ExactMoments {
        std::function<double(double delta, double x, const ParamPoint&)> F;
        std::function<double(double delta, double x, const ParamPoint&)> F_dalpha;
        std::function<double(double delta, double x, const ParamPoint&)> F_dbeta;
        std::function<double(double delta, double x, const ParamPoint&)> phi;
        std::function<double(double delta, double x, const ParamPoint&)> phi_dalpha;
        std::function<double(double delta, double x, const ParamPoint&)> phi_dbeta;
    };
    std::optional<ExactMoments> exact_moments;

    // optional closed forms used by the local-Gaussian pseudo-score:
    // k(x;beta) = int 1/sigma, m(x;alpha,beta) = int b/sigma^2
    struct ScoreIntegrals {
        std::function<double(double x, const ParamPoint&)> k;
        std::function<double(double x, const ParamPoint&)> k_dbeta;
        std::function<double(double x, const ParamPoint&)> m;
        std::function<double(double x, const ParamPoint&)> m_dalpha;
        std::function<double(double x, const ParamPoint&)> m_dbeta;
    };
    std::optional<ScoreIntegrals> score_integrals;

    double sigma(double x, const ParamPoint& theta) const {
        return std::sqrt(diffusion_sq(x, theta, 0));
    }

    void require_inside(double x) const {
        if (!interval.contains(x)) throw DomainError(name + ": state " + std::to_string(x) + " outside interval");
    }
};

using ModelPtr = std::shared_ptr<const DiffusionModel>;

// Builtins: "ou" (b = -alpha x, sigma = beta on R) and "cir"
// (b = alpha (m0 - x), sigma = beta sqrt(x) on (0, inf); fixed m0 > 0).
ModelPtr builtin_model(const std::string& name, double fixed_m0 = 1.0);

// User model from plain coefficient callables; every derivative is taken by
// central finite differences.
ModelPtr make_custom_model(std::string name, std::function<double(double, double)> b_of_x_alpha,
                           std::function<double(double, double)> sigma_of_x_beta,
                           StateInterval interval, double anchor);

// L_theta^order f(x) with L_theta f = b f' + v f''/2, by jet recursion.
// Supported orders: 1..3 (needs coefficient x-derivatives up to 2(order-1)).
double apply_generator(const DiffusionModel& model, const ParamPoint& theta,
                       const ScalarField& f, int order, double x);

// Jet variant: q[k] = f^(k)(x) for k = 0..jet.size()-1 in, L f jet out (two
// orders shorter). Used by the expansion machinery.
std::vector<double> generator_jet(const DiffusionModel& model, const ParamPoint& theta,
                                  const std::vector<double>& f_jet, double x);

// Stationary law mu_theta ~ 1/(s v), normalized over the interval truncated
// where the unnormalized density falls below 1e-12 of its maximum. Immutable
// once constructed; safe to share.
class StationaryLaw {
  public:
    StationaryLaw(ModelPtr model, const ParamPoint& theta);

    double density(double x) const;
    double log_unnormalized(double x) const;
    // int h(x) mu(x) dx by adaptive quadrature, relative tolerance rel_tol
    double expectation(const std::function<double(double)>& h, double rel_tol = 1e-8) const;
    double quantile(double p) const;

    double lo() const { return lo_; }
    double hi() const { return hi_; }

  private:
    ModelPtr model_;
    ParamPoint theta_;
    double lo_ = 0.0, hi_ = 0.0;
    double log_max_ = 0.0;
    double norm_ = 0.0;  // integral of exp(log_unnormalized - log_max)
    std::vector<double> cdf_grid_x_;
    std::vector<double> cdf_grid_p_;

    double scale_integral(double x) const;  // int_anchor^x b/v
};

using LawPtr = std::shared_ptr<const StationaryLaw>;

// Cached stationary laws keyed by (model, theta); write-once per key.
LawPtr stationary_law(ModelPtr model, const ParamPoint& theta);

double stationary_density(ModelPtr model, const ParamPoint& theta, double x);
double stationary_expectation(ModelPtr model, const ParamPoint& theta, const ScalarField& h);
double stationary_expectation(ModelPtr model, const ParamPoint& theta,
                              const std::function<double(double)>& h);

// 21 stationary quantiles (0.025 ... 0.975), the default checker grid.
std::vector<double> stationary_quantile_grid(ModelPtr model, const ParamPoint& theta,
                                             int points = 21);

}  // namespace hfde
