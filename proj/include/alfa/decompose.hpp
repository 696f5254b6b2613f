#pragma once

#include <string>

#include "alfa/matrix.hpp"

namespace alfa {

// Truncated-SVD factorization of one layer's weight, stored as U (m x d) and
// Vbase = diag(S) * Vt (d x n). The singular values live in the row norms of
// Vbase; they are never kept separately.
struct DecomposedLayer {
    std::string name;
    Matrix U;     // m x d, orthonormal columns
    Matrix Vbase; // d x n, row L2 norms non-increasing
    int d = 0;
    int m = 0;
    int n = 0;
};

DecomposedLayer decompose_layer(const Matrix& w, int d, const std::string& name = "");

// Frobenius norm of w - U * Vbase.
double reconstruction_error(const DecomposedLayer& layer, const Matrix& w);

// Rank-1 contribution of basis row s: outer(U[:, s], Vbase[s, :]).
Matrix rank_slice(const DecomposedLayer& layer, int s);

// U * Vbase, materialized.
Matrix reconstruct(const DecomposedLayer& layer);

} // namespace alfa
