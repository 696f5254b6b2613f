#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace alfa {

// Dense row-major matrix, binary64 throughout. The single carrier type for
// weights, bases, activations and gradients.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
    Matrix(int r, int c, std::vector<double> values);
    Matrix(std::initializer_list<std::initializer_list<double>> init);

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return data.size(); }
    std::string shape_str() const;

    static Matrix zeros(int r, int c) { return Matrix(r, c); }
    static Matrix identity(int n);
};

bool same_shape(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double c);
// Numerically stable row-wise softmax (per-row max subtraction).
Matrix softmax_rows(const Matrix& m);
// Rank-1 outer product of a column vector (m x 1 view) and row vector.
Matrix outer(const std::vector<double>& col, const std::vector<double>& row);

double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& m);
bool all_zero(const Matrix& m);
bool bit_equal(const Matrix& a, const Matrix& b);

} // namespace alfa
