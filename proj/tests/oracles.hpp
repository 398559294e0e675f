#pragma once

// Test-only oracles, independent of the library implementation paths they
// check: closed-form conditional and stationary moments of the linear
// mean-reverting model, gamma-law facts for the square-root model, simple
// sample statistics, and a least-squares slope.

#include <cmath>
#include <vector>

namespace oracle {

// dX = -a X dt + b dW
inline double ou_F(double d, double x, double a) { return x * std::exp(-a * d); }
inline double ou_phi(double d, double a, double b) {
    return b * b * (1.0 - std::exp(-2.0 * a * d)) / (2.0 * a);
}
inline double ou_F_dalpha(double d, double x, double a) { return -d * x * std::exp(-a * d); }
inline double ou_phi_dbeta(double d, double a, double b) {
    return b * (1.0 - std::exp(-2.0 * a * d)) / a;
}
inline double ou_stat_var(double a, double b) { return b * b / (2.0 * a); }
inline double gauss_pdf(double x, double mean, double var) {
    return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * M_PI * var);
}

// gamma stationary law of the square-root model: shape 2 a m0 / b^2, rate 2 a / b^2
inline double cir_shape(double a, double b, double m0) { return 2.0 * a * m0 / (b * b); }
inline double cir_rate(double a, double b) { return 2.0 * a / (b * b); }
inline double gamma_pdf(double x, double shape, double rate) {
    return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x -
                    std::lgamma(shape));
}

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

struct Moments {
    double mean = 0, var = 0, skew = 0, ex_kurt = 0;
};

inline Moments moments(const std::vector<double>& v) {
    Moments m;
    const double n = static_cast<double>(v.size());
    for (double x : v) m.mean += x;
    m.mean /= n;
    double s2 = 0, s3 = 0, s4 = 0;
    for (double x : v) {
        const double d = x - m.mean;
        s2 += d * d;
        s3 += d * d * d;
        s4 += d * d * d * d;
    }
    m.var = s2 / (n - 1);
    const double sd = std::sqrt(s2 / n);
    m.skew = (s3 / n) / (sd * sd * sd);
    m.ex_kurt = (s4 / n) / (sd * sd * sd * sd) - 3.0;
    return m;
}

}  // namespace oracle
