#include "alfa/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alfa/errors.hpp"

namespace alfa {

namespace {

// Orthogonalizes the columns of a (M x N, M >= N treated generically) in
// place, accumulating the applied rotations into v (N x N). On exit the
// column norms of a are the singular values.
void jacobi_orthogonalize(Matrix& a, Matrix& v) {
    const int n = a.cols;
    const int m = a.rows;
    const double tol = 1e-15;
    const int max_sweeps = 60;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        int rotations = 0;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (int i = 0; i < m; ++i) {
                    const double ap = a(i, p);
                    const double aq = a(i, q);
                    alpha += ap * ap;
                    beta += aq * aq;
                    gamma += ap * aq;
                }
                if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                ++rotations;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (int i = 0; i < m; ++i) {
                    const double ap = a(i, p);
                    const double aq = a(i, q);
                    a(i, p) = c * ap - s * aq;
                    a(i, q) = s * ap + c * aq;
                }
                for (int i = 0; i < n; ++i) {
                    const double vp = v(i, p);
                    const double vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        if (rotations == 0) break;
    }
}

// Fills column k of u with a unit vector orthogonal to columns [0, k).
// Needed when the input is rank deficient and a singular value is zero.
void complete_column(Matrix& u, int k) {
    const int m = u.rows;
    Matrix best(m, 1);
    double best_norm = -1.0;
    for (int cand = 0; cand < m; ++cand) {
        std::vector<double> e(m, 0.0);
        e[cand] = 1.0;
        for (int j = 0; j < k; ++j) {
            double dot = 0.0;
            for (int i = 0; i < m; ++i) dot += u(i, j) * e[i];
            for (int i = 0; i < m; ++i) e[i] -= dot * u(i, j);
        }
        double norm = 0.0;
        for (double x : e) norm += x * x;
        norm = std::sqrt(norm);
        if (norm > best_norm) {
            best_norm = norm;
            for (int i = 0; i < m; ++i) best(i, 0) = e[i];
        }
        if (norm > 0.7) break; // good enough, stop scanning
    }
    for (int i = 0; i < m; ++i) u(i, k) = best(i, 0) / best_norm;
}

} // namespace

SvdResult svd(const Matrix& w, int d) {
    const int m = w.rows;
    const int n = w.cols;
    if (d < 1 || d > std::min(m, n)) {
        throw RankError("rank " + std::to_string(d) + " out of range for " + w.shape_str());
    }

    // Work on the side with fewer columns so the accumulated rotation matrix
    // (the Gram-side factor) is min(m, n) square.
    const bool transposed = m < n;
    Matrix a = transposed ? transpose(w) : w;   // M x N with N = min(m, n)
    const int big = a.rows;
    const int small = a.cols;
    Matrix rot = Matrix::identity(small);
    jacobi_orthogonalize(a, rot);

    std::vector<double> sigma(small);
    for (int k = 0; k < small; ++k) {
        double s = 0.0;
        for (int i = 0; i < big; ++i) s += a(i, k) * a(i, k);
        sigma[k] = std::sqrt(s);
    }

    std::vector<int> order(small);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return sigma[x] > sigma[y]; });

    Matrix left(big, small);   // normalized columns of a
    Matrix right(small, small); // accumulated rotations
    std::vector<double> s_sorted(small);
    double sigma_max = sigma.empty() ? 0.0 : sigma[order[0]];
    const double zero_tol = static_cast<double>(std::max(big, small)) * 1e-15 * std::max(sigma_max, 1e-300);
    for (int k = 0; k < small; ++k) {
        const int src = order[k];
        s_sorted[k] = sigma[src];
        for (int i = 0; i < small; ++i) right(i, k) = rot(i, src);
        if (sigma[src] > zero_tol) {
            for (int i = 0; i < big; ++i) left(i, k) = a(i, src) / sigma[src];
        } else {
            s_sorted[k] = 0.0;
            complete_column(left, k);
        }
    }

    SvdResult out;
    out.d = d;
    out.S.assign(s_sorted.begin(), s_sorted.begin() + d);
    if (!transposed) {
        // w = left * diag(sigma) * right^T
        out.U = Matrix(m, d);
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < d; ++k) out.U(i, k) = left(i, k);
        out.Vt = Matrix(d, n);
        for (int k = 0; k < d; ++k)
            for (int j = 0; j < n; ++j) out.Vt(k, j) = right(j, k);
    } else {
        // w^T = left * diag(sigma) * right^T  =>  w = right * diag(sigma) * left^T
        out.U = Matrix(m, d);
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < d; ++k) out.U(i, k) = right(i, k);
        out.Vt = Matrix(d, n);
        for (int k = 0; k < d; ++k)
            for (int j = 0; j < n; ++j) out.Vt(k, j) = left(j, k);
    }

    // Deterministic sign convention on the right singular vectors.
    for (int k = 0; k < d; ++k) {
        int arg = 0;
        double best = std::abs(out.Vt(k, 0));
        for (int j = 1; j < n; ++j) {
            const double v = std::abs(out.Vt(k, j));
            if (v > best) {
                best = v;
                arg = j;
            }
        }
        if (out.Vt(k, arg) < 0.0) {
            for (int j = 0; j < n; ++j) out.Vt(k, j) = -out.Vt(k, j);
            for (int i = 0; i < m; ++i) out.U(i, k) = -out.U(i, k);
        }
    }
    return out;
}

double truncation_error(const Matrix& w, const SvdResult& r) {
    Matrix us = r.U;
    for (int i = 0; i < us.rows; ++i)
        for (int k = 0; k < us.cols; ++k) us(i, k) *= r.S[static_cast<size_t>(k)];
    return frobenius_norm(sub(w, matmul(us, r.Vt)));
}

} // namespace alfa
