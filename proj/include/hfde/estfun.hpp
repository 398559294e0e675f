#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hfde/linalg.hpp"
#include "hfde/model.hpp"
#include "hfde/simulate.hpp"

namespace hfde {

struct MissingMomentsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularBasisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Declared approximate-martingale order: exact martingale or kappa >= 2.
struct Kappa {
    bool exact = false;
    int order = 2;

    static Kappa Exact() { return Kappa{true, 0}; }
    static Kappa of(int k) { return Kappa{false, k}; }
    std::string str() const { return exact ? "exact" : std::to_string(order); }
};

// A 2-vector estimating-function summand g(Delta, y, x; theta) with a
// theta-Jacobian (analytic where the constructor can supply one, central
// finite differences otherwise). eval must be finite at Delta = 0.
struct EstimatingFunction {
    std::string name;
    std::function<Vec2(double delta, double y, double x, const ParamPoint&)> eval;
    std::function<Mat2(double delta, double y, double x, const ParamPoint&)> jac_theta;
    bool analytic_jac = false;
    Kappa kappa;
    std::string version_note;
    ModelPtr model;

    Vec2 operator()(double delta, double y, double x, const ParamPoint& theta) const {
        return eval(delta, y, x, theta);
    }
};

// G_n(theta) = sum_i g(Delta, X_i, X_{i-1}; theta), unnormalized.
Vec2 eval_G(const EstimatingFunction& ef, const SamplePath& path, const ParamPoint& theta);

// d G_n / d theta^T; one pass with analytic jacobians, otherwise four extra
// eval_G sweeps (central differences on the sum).
Mat2 jac_G(const EstimatingFunction& ef, const SamplePath& path, const ParamPoint& theta);

// 2x2 weight functions for the quadratic family; the parameter partials are
// optional and enable the analytic theta-Jacobian path.
struct Weight2x2 {
    std::function<Mat2(double x, double delta, const ParamPoint&)> A;
    std::function<Mat2(double x, double delta, const ParamPoint&)> A_dalpha;  // optional
    std::function<Mat2(double x, double delta, const ParamPoint&)> A_dbeta;   // optional
};

// Moment engine for the quadratic family: exact conditional moments or the
// generator expansion truncated at order kappa.
struct MomentSpec {
    bool exact = true;
    int kappa = 2;  // meaningful when !exact; supported: 2..4

    static MomentSpec Exact() { return MomentSpec{true, 0}; }
    static MomentSpec Expansion(int k) { return MomentSpec{false, k}; }
};

// g1 = A11 h1 + A12 h2, g2 = A21 h1 + A22 h2 with h1 = y - F and
// h2 = (y-F)^2 - phi; F, phi exact or truncated expansions.
EstimatingFunction quadratic_ef(ModelPtr model, const Weight2x2& weights,
                                const MomentSpec& moments, std::string name = "quadratic");

// Diagonal weights a1 = d_alpha b / v and a2 = d_beta v / (2 v^2); the one
// half makes the second coordinate satisfy the efficiency condition
// d^2_y g2(0,x,x) = d_beta v / v^2 in this centered form.
Weight2x2 efficient_quadratic_weights(ModelPtr model);

// Euler pseudo-score: g1 = (d_alpha b / v)(y - x - b D),
// g2 = (d_beta v / (2 v^2))((y - x - b D)^2 - v D); kappa = 2.
EstimatingFunction euler_ef(ModelPtr model);

// Godambe-Heyde optimal quadratic weights a1 = d_alpha F / phi,
// a2 = (D/2) d_beta phi / phi^2 with the continuous limits at D = 0.
EstimatingFunction gh_optimal_quadratic(ModelPtr model);

// Local-Gaussian density expansion pseudo-score; second coordinate carries
// the Delta factor. kappa = 2.
EstimatingFunction local_gaussian_score_ef(ModelPtr model);

// Negative control with an uncentered second moment: g2 = a2 (y^2 - (phi + F^2)).
// Martingale, but violates the rate-optimality condition.
EstimatingFunction non_rate_optimal_ef(ModelPtr model,
                                       std::function<double(double, const ParamPoint&)> a1,
                                       std::function<double(double, const ParamPoint&)> a2,
                                       std::string name = "non-rate");

// ---------------------------------------------------------------------------
// basis-form estimating functions g = A(x,D)[f(y) - pi f(x)]

struct BasisFunctions {
    int n = 0;
    int max_dx = 3;
    // eval(j, x, theta, dx_order)
    std::function<double(int j, double x, const ParamPoint&, int dx_order)> eval;

    // theta-independent polynomial basis; coeffs[j][k] multiplies x^k
    static BasisFunctions polynomials(std::vector<std::vector<double>> coeffs);
};

// 2xN weight matrix as a function of (x, Delta, theta), row-major.
struct WeightMatrixN {
    int n = 0;
    std::function<std::vector<double>(double x, double delta, const ParamPoint&)> rows;
};

// Constructive rate-optimal efficient weights, Delta-constant:
// A(x) = [[d_alpha b / v, c], [0, d_beta v / v^2]] M(x)^{-1} with
// M = [[f1', f1''], [f2', f2'']]. Throws SingularBasisError when M is singular.
WeightMatrixN efficient_weights(ModelPtr model, const BasisFunctions& basis,
                                std::function<double(double, const ParamPoint&)> c = {});

// Godambe-Heyde optimal weights normalized as B = diag(1, Delta) A*, where
// A* solves A* Cov[f(X_D)|x] = d_theta pi f - pi d_theta f. At Delta = 0 the
// continuous limit is computed by second-order perturbation of the system.
// engine: "exact" (Gaussian transition models) or "expansion".
WeightMatrixN gh_optimal_general(ModelPtr model, const BasisFunctions& basis,
                                 const std::string& engine);

// EF from basis weights; the bracket uses exact moments when the engine is
// "exact", otherwise the order-kappa expansion of pi f.
EstimatingFunction basis_ef(ModelPtr model, const BasisFunctions& basis,
                            const WeightMatrixN& weights, const MomentSpec& moments,
                            std::string name);

// conditional mean of h(X_Delta) given x for Gaussian-transition models, by
// quadrature against the exact transition law (used by probes and the exact
// GH engine)
double gaussian_transition_mean(const DiffusionModel& model, const ParamPoint& theta,
                                double delta, double x,
                                const std::function<double(double)>& h);

// truncated conditional moments used by the expansion engine
double expansion_F(const DiffusionModel& model, const ParamPoint& theta, int kappa,
                   double delta, double x);
double expansion_phi(const DiffusionModel& model, const ParamPoint& theta, int kappa,
                     double delta, double x);

// ---------------------------------------------------------------------------
// catalog

// Names: quad-exact-efficient, quad-expansion-k2, euler, gh-quadratic,
// gh-general, local-gaussian, non-rate-control.
EstimatingFunction catalog_ef(const std::string& name, ModelPtr model);
std::vector<std::string> catalog_names();

}  // namespace hfde
