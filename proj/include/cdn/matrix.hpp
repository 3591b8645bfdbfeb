#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cdn {

// Row-major dense matrix of doubles. Rows are samples, columns are variables.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(size_t i, size_t j) { return data[i * cols + j]; }
    double operator()(size_t i, size_t j) const { return data[i * cols + j]; }

    bool empty() const { return rows == 0 || cols == 0; }
};

namespace linalg {

// LU decomposition with partial pivoting; all matrices here are small (<= ~15x15).
// Returns false if the matrix is numerically singular.
bool lu_factor(std::vector<double>& a, int n, std::vector<int>& piv);
bool invert(const std::vector<double>& a, int n, std::vector<double>& inv);
// log|det(A)| for symmetric positive definite A via the LU diagonal; returns
// false when a pivot is non-positive.
bool logdet_spd(const std::vector<double>& a, int n, double& out);

}  // namespace linalg
}  // namespace cdn
