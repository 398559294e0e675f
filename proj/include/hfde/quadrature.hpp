#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace hfde {

struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

template <class F>
double simpson_recur(const F& f, double a, double b, double fa, double fm, double fb,
                     double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = (left + right) - whole;
    if (std::abs(diff) <= 15.0 * eps || depth <= 0)
        return left + right + diff / 15.0;  // Richardson correction
    return simpson_recur(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           simpson_recur(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

}  // namespace detail

// Adaptive Simpson on [a,b]. `tol` is treated as an absolute tolerance; callers
// wanting a relative tolerance scale it by an estimate of |integral|.
template <class F>
double integrate_adaptive(const F& f, double a, double b, double tol = 1e-10,
                          int max_depth = 48) {
    if (a == b) return 0.0;
    if (b < a) return -integrate_adaptive(f, b, a, tol, max_depth);
    // seed with a few panels so narrow features are not missed
    const int panels = 8;
    const double w = (b - a) / panels;
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double x0 = a + i * w;
        const double x1 = x0 + w;
        const double xm = 0.5 * (x0 + x1);
        const double f0 = f(x0), f1 = f(x1), fm = f(xm);
        const double whole = w / 6.0 * (f0 + 4.0 * fm + f1);
        total += detail::simpson_recur(f, x0, x1, f0, fm, f1, whole, tol / panels,
                                       max_depth);
    }
    if (!std::isfinite(total)) throw QuadratureError("adaptive Simpson: non-finite result");
    return total;
}

// Two-pass relative-tolerance wrapper: first pass with a loose absolute
// tolerance to size the integral, second pass at rel_tol * |estimate|. The
// absolute floor keeps near-zero integrals (cancelling integrands) from
// driving the refinement into rounding noise.
template <class F>
double integrate_relative(const F& f, double a, double b, double rel_tol = 1e-8,
                          double abs_floor = 1e-12) {
    const double rough = integrate_adaptive(f, a, b, 1e-6);
    const double tol = std::max(rel_tol * std::abs(rough), abs_floor);
    return integrate_adaptive(f, a, b, tol);
}

}  // namespace hfde
