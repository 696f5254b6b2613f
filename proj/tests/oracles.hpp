#pragma once

// Test-only reference implementations. These stay independent of the library
// code paths they are used to check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "alfa/matrix.hpp"
#include "alfa/model.hpp"
#include "alfa/rng.hpp"

namespace oracles {

inline alfa::Matrix random_matrix(int rows, int cols, alfa::Rng& rng, double scale = 1.0) {
    alfa::Matrix m(rows, cols);
    for (double& v : m.data) v = rng.gaussian(0.0, scale);
    return m;
}

// Cyclic two-sided Jacobi eigenvalue iteration for symmetric matrices.
// Returns eigenvalues sorted descending.
inline std::vector<double> jacobi_eigenvalues(alfa::Matrix a) {
    const int n = a.rows;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-28) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) eig[static_cast<size_t>(i)] = a(i, i);
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return eig;
}

// Singular values of w via an eigen-decomposition of the smaller Gram matrix.
inline std::vector<double> gram_singular_values(const alfa::Matrix& w) {
    const alfa::Matrix gram = w.rows <= w.cols ? alfa::matmul(w, alfa::transpose(w))
                                               : alfa::matmul(alfa::transpose(w), w);
    std::vector<double> eig = jacobi_eigenvalues(gram);
    for (double& v : eig) v = std::sqrt(std::max(0.0, v));
    return eig;
}

// sqrt(sum of squared singular values past index d): the Frobenius error of
// the best rank-d approximation.
inline double tail_energy(const alfa::Matrix& w, int d) {
    const std::vector<double> sv = gram_singular_values(w);
    double tail = 0.0;
    for (size_t i = static_cast<size_t>(d); i < sv.size(); ++i) tail += sv[i] * sv[i];
    return std::sqrt(tail);
}

// Patch matrix for a 3x3 pad-1 stride-1 convolution: (in_ch*9) x (h*w),
// column p holds the flattened receptive field of output pixel p.
inline alfa::Matrix im2col3x3(const alfa::Tensor3& in) {
    const int h = in.h, w = in.w;
    alfa::Matrix patches(in.ch * 9, h * w);
    for (int c = 0; c < in.ch; ++c) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const int row = c * 9 + ky * 3 + kx;
                for (int y = 0; y < h; ++y) {
                    for (int x = 0; x < w; ++x) {
                        const int iy = y + ky - 1;
                        const int ix = x + kx - 1;
                        const double v =
                            (iy >= 0 && iy < h && ix >= 0 && ix < w) ? in.at(c, iy, ix) : 0.0;
                        patches(row, y * w + x) = v;
                    }
                }
            }
        }
    }
    return patches;
}

inline double rel_err(double got, double want, double floor = 1e-6) {
    return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor});
}

} // namespace oracles
