#include <doctest.h>

#include <cmath>

#include "alfa/errors.hpp"
#include "alfa/svd.hpp"
#include "oracles.hpp"

using namespace alfa;

namespace {

double orthonormality_defect_cols(const Matrix& u) {
    const Matrix g = matmul(transpose(u), u);
    return max_abs_diff(g, Matrix::identity(g.rows));
}

double orthonormality_defect_rows(const Matrix& vt) {
    const Matrix g = matmul(vt, transpose(vt));
    return max_abs_diff(g, Matrix::identity(g.rows));
}

} // namespace

TEST_SUITE("svd") {

TEST_CASE("identity truncated at rank 2 has error sqrt(2)") {
    const SvdResult r = svd(Matrix::identity(4), 2);
    CHECK(truncation_error(Matrix::identity(4), r) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
    CHECK(r.S[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.S[1] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("rank-1 matrix reconstructs exactly at d=1") {
    Rng rng(21);
    const Matrix u = oracles::random_matrix(5, 1, rng);
    const Matrix v = oracles::random_matrix(1, 7, rng);
    const Matrix w = matmul(u, v);
    const SvdResult r = svd(w, 1);
    CHECK(truncation_error(w, r) <= 1e-10);
}

TEST_CASE("singular values match an independent eigen-solve") {
    Rng rng(42);
    const Matrix w = oracles::random_matrix(8, 6, rng);
    const SvdResult r = svd(w, 3);
    const std::vector<double> oracle = oracles::gram_singular_values(w);
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(r.S[static_cast<size_t>(k)] - oracle[static_cast<size_t>(k)]) <= 1e-9);
    }
}

TEST_CASE("rank out of range") {
    CHECK_THROWS_AS(svd(Matrix::identity(4), 0), RankError);
    CHECK_THROWS_AS(svd(Matrix::identity(4), 5), RankError);
    CHECK_THROWS_AS(svd(Matrix(3, 7), 4), RankError);
}

TEST_CASE("seeded shapes: orthonormality, ordering, optimal truncation error") {
    Rng rng(2024);
    for (int trial = 0; trial < 25; ++trial) {
        const int m = rng.uniform_int(1, 24);
        const int n = rng.uniform_int(1, 40);
        const int d = rng.uniform_int(1, std::min(m, n));
        const Matrix w = oracles::random_matrix(m, n, rng);
        const SvdResult r = svd(w, d);
        CHECK(orthonormality_defect_cols(r.U) <= 1e-8);
        CHECK(orthonormality_defect_rows(r.Vt) <= 1e-8);
        for (int k = 1; k < d; ++k) {
            CHECK(r.S[static_cast<size_t>(k)] <= r.S[static_cast<size_t>(k - 1)] + 1e-12);
            CHECK(r.S[static_cast<size_t>(k)] >= 0.0);
        }
        CHECK(std::abs(truncation_error(w, r) - oracles::tail_energy(w, d)) <= 1e-8);
    }
}

TEST_CASE("rank-deficient input still yields orthonormal factors") {
    Rng rng(77);
    const Matrix a = oracles::random_matrix(6, 2, rng);
    const Matrix b = oracles::random_matrix(2, 5, rng);
    const Matrix w = matmul(a, b); // rank 2
    const SvdResult r = svd(w, 4);
    CHECK(orthonormality_defect_cols(r.U) <= 1e-8);
    CHECK(orthonormality_defect_rows(r.Vt) <= 1e-8);
    CHECK(r.S[2] <= 1e-9);
    CHECK(r.S[3] <= 1e-9);
    CHECK(all_finite(r.U));
    CHECK(all_finite(r.Vt));
}

TEST_CASE("sign convention: largest-magnitude entry of each right vector is positive") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix w = oracles::random_matrix(7, 9, rng);
        const SvdResult r = svd(w, 4);
        for (int k = 0; k < r.d; ++k) {
            int arg = 0;
            for (int j = 1; j < r.Vt.cols; ++j) {
                if (std::abs(r.Vt(k, j)) > std::abs(r.Vt(k, arg))) arg = j;
            }
            CHECK(r.Vt(k, arg) > 0.0);
        }
    }
}

TEST_CASE("decomposition is deterministic") {
    Rng rng(4);
    const Matrix w = oracles::random_matrix(10, 8, rng);
    const SvdResult a = svd(w, 5);
    const SvdResult b = svd(w, 5);
    CHECK(bit_equal(a.U, b.U));
    CHECK(bit_equal(a.Vt, b.Vt));
}

} // TEST_SUITE
