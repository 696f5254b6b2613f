#include <doctest.h>

#include <cmath>

#include "alfa/decompose.hpp"
#include "alfa/errors.hpp"
#include "oracles.hpp"

using namespace alfa;

namespace {

double row_norm(const Matrix& m, int row) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(row, j) * m(row, j);
    return std::sqrt(s);
}

} // namespace

TEST_SUITE("decompose") {

TEST_CASE("identity at rank 2: unit basis rows, error sqrt(2)") {
    const DecomposedLayer layer = decompose_layer(Matrix::identity(4), 2);
    CHECK(row_norm(layer.Vbase, 0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(row_norm(layer.Vbase, 1) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(reconstruction_error(layer, Matrix::identity(4)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
}

TEST_CASE("rank-1 weight reconstructs exactly at d=1") {
    Rng rng(61);
    const Matrix w = matmul(oracles::random_matrix(6, 1, rng), oracles::random_matrix(1, 9, rng));
    const DecomposedLayer layer = decompose_layer(w, 1);
    CHECK(max_abs_diff(reconstruct(layer), w) <= 1e-10);
    CHECK(reconstruction_error(layer, w) <= 1e-10);
}

TEST_CASE("stem-shaped weight matches the full-decomposition tail energy") {
    Rng rng(62);
    const Matrix w = oracles::random_matrix(64, 147, rng);
    const DecomposedLayer layer = decompose_layer(w, 64);
    CHECK(std::abs(reconstruction_error(layer, w) - oracles::tail_energy(w, 64)) <= 1e-8);
}

TEST_CASE("basis row norms are non-increasing") {
    Rng rng(63);
    const Matrix w = oracles::random_matrix(12, 17, rng);
    const DecomposedLayer layer = decompose_layer(w, 9);
    for (int k = 1; k < layer.d; ++k) {
        CHECK(row_norm(layer.Vbase, k) <= row_norm(layer.Vbase, k - 1) + 1e-12);
    }
}

TEST_CASE("reconstruction error is non-increasing in rank") {
    Rng rng(64);
    const Matrix w = oracles::random_matrix(10, 14, rng);
    double prev = 1e300;
    for (int d = 1; d <= 10; ++d) {
        const double err = reconstruction_error(decompose_layer(w, d), w);
        CHECK(err <= prev + 1e-10);
        prev = err;
    }
}

TEST_CASE("slice sum reconstructs the truncated product") {
    Rng rng(65);
    const Matrix w = oracles::random_matrix(9, 13, rng);
    const DecomposedLayer layer = decompose_layer(w, 5);
    Matrix total(9, 13);
    for (int s = 0; s < layer.d; ++s) total = add(total, rank_slice(layer, s));
    CHECK(max_abs_diff(total, reconstruct(layer)) <= 1e-10);
}

TEST_CASE("slice of a rank-1 layer reproduces the whole matrix") {
    Rng rng(66);
    const Matrix w = matmul(oracles::random_matrix(4, 1, rng), oracles::random_matrix(1, 6, rng));
    const DecomposedLayer layer = decompose_layer(w, 1);
    CHECK(max_abs_diff(rank_slice(layer, 0), w) <= 1e-10);
}

TEST_CASE("identity slice has unit Frobenius norm") {
    const DecomposedLayer layer = decompose_layer(Matrix::identity(4), 2);
    CHECK(frobenius_norm(rank_slice(layer, 1)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("re-decomposing the truncated product changes nothing") {
    Rng rng(67);
    const Matrix w = oracles::random_matrix(8, 11, rng);
    const DecomposedLayer first = decompose_layer(w, 4);
    const DecomposedLayer second = decompose_layer(reconstruct(first), 4);
    CHECK(max_abs_diff(reconstruct(second), reconstruct(first)) <= 1e-10);
}

TEST_CASE("errors: rank, slice index, shape") {
    CHECK_THROWS_AS(decompose_layer(Matrix::identity(3), 4), RankError);
    CHECK_THROWS_AS(decompose_layer(Matrix::identity(3), 0), RankError);
    const DecomposedLayer layer = decompose_layer(Matrix::identity(4), 2);
    CHECK_THROWS_AS(rank_slice(layer, 2), IndexError);
    CHECK_THROWS_AS(rank_slice(layer, -1), IndexError);
    CHECK_THROWS_AS(reconstruction_error(layer, Matrix(3, 3)), ShapeError);
}

TEST_CASE("reconstruction error of the exact product is zero") {
    Rng rng(68);
    const Matrix w = oracles::random_matrix(7, 7, rng);
    const DecomposedLayer layer = decompose_layer(w, 7);
    CHECK(reconstruction_error(layer, w) <= 1e-10);
}

} // TEST_SUITE
