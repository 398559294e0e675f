#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hfde {

struct Vec2 {
    double x0 = 0.0, x1 = 0.0;

    double& operator[](int i) { return i == 0 ? x0 : x1; }
    double operator[](int i) const { return i == 0 ? x0 : x1; }

    Vec2 operator+(const Vec2& o) const { return {x0 + o.x0, x1 + o.x1}; }
    Vec2 operator-(const Vec2& o) const { return {x0 - o.x0, x1 - o.x1}; }
    Vec2 operator*(double s) const { return {x0 * s, x1 * s}; }
    Vec2& operator+=(const Vec2& o) {
        x0 += o.x0;
        x1 += o.x1;
        return *this;
    }
    double inf_norm() const { return std::max(std::abs(x0), std::abs(x1)); }
};

struct Mat2 {
    // row-major: m[row][col]
    double m[2][2] = {{0.0, 0.0}, {0.0, 0.0}};

    double& operator()(int r, int c) { return m[r][c]; }
    double operator()(int r, int c) const { return m[r][c]; }

    static Mat2 identity() { return Mat2{{{1.0, 0.0}, {0.0, 1.0}}}; }
    static Mat2 diag(double a, double b) { return Mat2{{{a, 0.0}, {0.0, b}}}; }

    double det() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }

    Mat2 operator+(const Mat2& o) const {
        Mat2 r;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
        return r;
    }
    Mat2 operator-(const Mat2& o) const {
        Mat2 r;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) r.m[i][j] = m[i][j] - o.m[i][j];
        return r;
    }
    Mat2 operator*(double s) const {
        Mat2 r;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) r.m[i][j] = m[i][j] * s;
        return r;
    }
    Mat2 operator*(const Mat2& o) const {
        Mat2 r;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                r.m[i][j] = m[i][0] * o.m[0][j] + m[i][1] * o.m[1][j];
        return r;
    }
    Vec2 operator*(const Vec2& v) const {
        return {m[0][0] * v.x0 + m[0][1] * v.x1, m[1][0] * v.x0 + m[1][1] * v.x1};
    }
    Mat2 transpose() const { return Mat2{{{m[0][0], m[1][0]}, {m[0][1], m[1][1]}}}; }

    Mat2 inverse() const {
        const double d = det();
        if (d == 0.0) throw std::runtime_error("Mat2: singular matrix");
        const double s = 1.0 / d;
        return Mat2{{{m[1][1] * s, -m[0][1] * s}, {-m[1][0] * s, m[0][0] * s}}};
    }

    // solve M z = v
    Vec2 solve(const Vec2& v) const { return inverse() * v; }

    double inf_norm() const {
        return std::max(std::abs(m[0][0]) + std::abs(m[0][1]),
                        std::abs(m[1][0]) + std::abs(m[1][1]));
    }
};

inline Vec2 row_times(const Vec2& row, const Mat2& m) {
    return {row.x0 * m(0, 0) + row.x1 * m(1, 0), row.x0 * m(0, 1) + row.x1 * m(1, 1)};
}

// Dense N x N solve by Gaussian elimination with partial pivoting.
// a is row-major and is destroyed; b holds the solution on return.
// Returns false when the pivot falls below `singular_tol` times the row scale.
inline bool gauss_solve(std::vector<double>& a, std::vector<double>& b, std::size_t n,
                        double singular_tol = 1e-13) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return false;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(a[perm[col] * n + col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(a[perm[r] * n + col]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best <= singular_tol * scale) return false;
        std::swap(perm[col], perm[piv]);
        const double pivval = a[perm[col] * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[perm[r] * n + col] / pivval;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[perm[r] * n + c] -= f * a[perm[col] * n + c];
            b[perm[r]] -= f * b[perm[col]];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[perm[i]];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[perm[i] * n + c] * x[c];
        x[i] = s / a[perm[i] * n + i];
    }
    b = std::move(x);
    return true;
}

inline double binom_coeff(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return sxy / sxx;
}

}  // namespace hfde
