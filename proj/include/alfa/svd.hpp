#pragma once

#include <vector>

#include "alfa/matrix.hpp"

namespace alfa {

// Truncated singular value decomposition W ~ U * diag(S) * Vt.
struct SvdResult {
    Matrix U;              // m x d, orthonormal columns
    std::vector<double> S; // d singular values, non-increasing, >= 0
    Matrix Vt;             // d x n, orthonormal rows
    int d = 0;
};

// One-sided Jacobi SVD, run on whichever side has the smaller Gram matrix.
// Sign convention: the largest-magnitude entry of each right singular vector
// (row of Vt) is positive; ties resolved by the lowest column index.
SvdResult svd(const Matrix& w, int d);

// Frobenius norm of W - U S Vt.
double truncation_error(const Matrix& w, const SvdResult& r);

} // namespace alfa
