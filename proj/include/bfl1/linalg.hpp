#pragma once

#include <cstddef>
#include <vector>

#include "bfl1/errors.hpp"

namespace bfl1 {

using Vector = std::vector<double>;

// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    bool operator==(const Matrix& other) const = default;
};

Matrix identity(std::size_t n);

// y = m * v
Vector matvec(const Matrix& m, const Vector& v);

// C += A * B with raw row-major buffers: A is m-by-k, B is k-by-p, C is m-by-p.
// Loop order keeps B and C accesses unit-stride so the compiler vectorizes it.
void gemm_accum(std::size_t m, std::size_t k, std::size_t p,
                const double* a, const double* b, double* c);

// out = transpose of an m-by-n row-major buffer.
void transpose_into(std::size_t m, std::size_t n, const double* a, double* out);

double dot(const Vector& a, const Vector& b);

// y += alpha * x
void axpy(double alpha, const Vector& x, Vector& y);

double l1_norm(const Vector& v);
double l2_norm(const Vector& v);
double linf_norm(const Vector& v);

} // namespace bfl1
