#include <doctest.h>

#include <cmath>

#include "alfa/errors.hpp"
#include "alfa/matrix.hpp"
#include "alfa/rng.hpp"
#include "oracles.hpp"

using namespace alfa;

TEST_SUITE("matrix") {

TEST_CASE("matmul identity returns the operand") {
    Rng rng(11);
    const Matrix m = oracles::random_matrix(3, 5, rng);
    CHECK(bit_equal(matmul(Matrix::identity(3), m), m));
}

TEST_CASE("matmul hand-computed 2x2 by 2x1") {
    const Matrix a{{1, 2}, {3, 4}};
    const Matrix b{{5}, {6}};
    const Matrix c = matmul(a, b);
    CHECK(c(0, 0) == 17.0);
    CHECK(c(1, 0) == 39.0);
}

TEST_CASE("matmul associativity in binary64") {
    Rng rng(7);
    const Matrix a = oracles::random_matrix(6, 4, rng);
    const Matrix b = oracles::random_matrix(4, 5, rng);
    const Matrix c = oracles::random_matrix(5, 3, rng);
    CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) <= 1e-9);
}

TEST_CASE("matmul dimension mismatch names both shapes") {
    const Matrix a(2, 3);
    const Matrix b(2, 3);
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("(2x3)"), ShapeError);
}

TEST_CASE("softmax of zeros is uniform") {
    const Matrix m(2, 3);
    const Matrix s = softmax_rows(m);
    for (double v : s.data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax analytic row") {
    Matrix m(1, 2);
    m(0, 0) = 0.0;
    m(0, 1) = std::log(3.0);
    const Matrix s = softmax_rows(m);
    CHECK(s(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax shift invariance") {
    Rng rng(3);
    Matrix m = oracles::random_matrix(4, 6, rng);
    Matrix shifted = m;
    for (double& v : shifted.data) v += 13.25;
    CHECK(max_abs_diff(softmax_rows(m), softmax_rows(shifted)) <= 1e-15);
}

TEST_CASE("softmax rows sum to one, extreme magnitudes included") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix m = oracles::random_matrix(3, 7, rng, 200.0);
        m(0, 0) = 700.0;
        m(1, 3) = -700.0;
        const Matrix s = softmax_rows(m);
        CHECK(all_finite(s));
        for (int i = 0; i < s.rows; ++i) {
            double total = 0.0;
            for (int j = 0; j < s.cols; ++j) total += s(i, j);
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("seeded operations are bit-reproducible") {
    const auto make = [] {
        Rng rng(99);
        const Matrix a = oracles::random_matrix(5, 4, rng);
        const Matrix b = oracles::random_matrix(4, 6, rng);
        return softmax_rows(matmul(a, b));
    };
    CHECK(bit_equal(make(), make()));
}

} // TEST_SUITE
