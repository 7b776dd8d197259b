#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "stiffkit/errors.hpp"

namespace stiffkit {

using Vec = std::vector<double>;

// Dense row-major matrix. Systems here are small (d <= 64), so plain loops
// beat any BLAS dispatch overhead and keep results bit-reproducible.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline Vec matvec(const Matrix& m, const Vec& x) {
    if (x.size() != m.cols) throw ValidationError("matvec: dimension mismatch");
    Vec y(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        const double* row = m.data.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

// y = m^T x, used by reverse-mode passes.
inline Vec matvec_transposed(const Matrix& m, const Vec& x) {
    if (x.size() != m.rows) throw ValidationError("matvec_transposed: dimension mismatch");
    Vec y(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.data.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) y[j] += row[j] * x[i];
    }
    return y;
}

// m += a b^T
inline void add_outer(Matrix& m, const Vec& a, const Vec& b) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.data.data() + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) row[j] += a[i] * b[j];
    }
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

inline Vec sub(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec add(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec scale(const Vec& a, double s) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * s;
    return r;
}

// a += s * b
inline void axpy(Vec& a, double s, const Vec& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

inline double max_abs(const Matrix& m) {
    double r = 0.0;
    for (double v : m.data) r = std::max(r, std::abs(v));
    return r;
}

inline double max_abs(const Vec& v) {
    double r = 0.0;
    for (double x : v) r = std::max(r, std::abs(x));
    return r;
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double max_asymmetry(const Matrix& m) {
    double r = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = i + 1; j < m.cols; ++j) r = std::max(r, std::abs(m(i, j) - m(j, i)));
    return r;
}

}  // namespace stiffkit
