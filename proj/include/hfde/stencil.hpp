#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace hfde {

// Finite-difference stencils shared by the model (coefficient derivatives),
// the condition checkers (y-derivatives at y=x, delta-derivatives at 0) and
// the theta-Jacobian fallback.

// Step sizes for x-derivatives of increasing order. Order 1 follows the
// h = 1e-5 * (1+|x|) rule; higher orders need wider steps to keep rounding
// noise below truncation error.
inline double fd_step_x(double x, int order) {
    static constexpr double base[5] = {0.0, 1e-5, 1e-4, 1e-3, 5e-3};
    if (order < 1 || order > 4) throw std::invalid_argument("fd_step_x: order 1..4");
    return base[order] * (1.0 + std::abs(x));
}

// Central 5-point first derivative.
template <class F>
double d1_central(const F& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

// Central 5-point second derivative.
template <class F>
double d2_central(const F& f, double x, double h) {
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) /
           (12 * h * h);
}

// Central third derivative (5-point).
template <class F>
double d3_central(const F& f, double x, double h) {
    return (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h)) / (2 * h * h * h);
}

// Central fourth derivative (5-point).
template <class F>
double d4_central(const F& f, double x, double h) {
    return (f(x + 2 * h) - 4 * f(x + h) + 6 * f(x) - 4 * f(x - h) + f(x - 2 * h)) /
           (h * h * h * h);
}

template <class F>
double dn_central(const F& f, double x, int order, double h) {
    switch (order) {
        case 0: return f(x);
        case 1: return d1_central(f, x, h);
        case 2: return d2_central(f, x, h);
        case 3: return d3_central(f, x, h);
        case 4: return d4_central(f, x, h);
        default: throw std::invalid_argument("dn_central: order 0..4");
    }
}

// One-sided derivatives at t = 0 from samples at {0, h, 2h, 3h}; the
// conditions live exactly at delta = 0 where only a forward stencil works.
template <class F>
double d1_forward(const F& f, double h) {
    return (-11.0 * f(0.0) + 18.0 * f(h) - 9.0 * f(2 * h) + 2.0 * f(3 * h)) / (6.0 * h);
}

template <class F>
double d2_forward(const F& f, double h) {
    return (2.0 * f(0.0) - 5.0 * f(h) + 4.0 * f(2 * h) - f(3 * h)) / (h * h);
}

}  // namespace hfde
