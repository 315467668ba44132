#include "bfl1/linalg.hpp"

#include <cmath>
#include <string>

namespace bfl1 {

Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vector matvec(const Matrix& m, const Vector& v) {
    if (m.cols != v.size())
        throw config_error("matvec: matrix has " + std::to_string(m.cols) +
                           " cols but vector has " + std::to_string(v.size()) + " entries");
    Vector y(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += r[j] * v[j];
        y[i] = acc;
    }
    return y;
}

void gemm_accum(std::size_t m, std::size_t k, std::size_t p,
                const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * p;
        for (std::size_t l = 0; l < k; ++l) {
            const double ail = ai[l];
            const double* bl = b + l * p;
            for (std::size_t j = 0; j < p; ++j) ci[j] += ail * bl[j];
        }
    }
}

void transpose_into(std::size_t m, std::size_t n, const double* a, double* out) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[j * m + i] = a[i * n + j];
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw config_error("dot: size mismatch " + std::to_string(a.size()) +
                           " vs " + std::to_string(b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, const Vector& x, Vector& y) {
    if (x.size() != y.size())
        throw config_error("axpy: size mismatch " + std::to_string(x.size()) +
                           " vs " + std::to_string(y.size()));
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double l1_norm(const Vector& v) {
    double acc = 0.0;
    for (double x : v) acc += std::abs(x);
    return acc;
}

double l2_norm(const Vector& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double linf_norm(const Vector& v) {
    double acc = 0.0;
    for (double x : v) acc = std::max(acc, std::abs(x));
    return acc;
}

} // namespace bfl1
