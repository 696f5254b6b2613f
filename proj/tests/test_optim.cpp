#include <doctest.h>

#include <cmath>

#include "alfa/errors.hpp"
#include "alfa/optim.hpp"
#include "oracles.hpp"

using namespace alfa;

TEST_SUITE("optim") {

TEST_CASE("zero gradient and zero decay leave the parameter unchanged") {
    Rng rng(51);
    const Matrix p0 = oracles::random_matrix(3, 3, rng);
    Matrix p = p0;
    AdamState st;
    AdamHyper h;
    h.lr = 0.1;
    adamw_step(p, Matrix(3, 3), st, h);
    CHECK(bit_equal(p, p0));
}

TEST_CASE("decoupled decay scales the parameter by (1 - lr * wd)") {
    Rng rng(52);
    const Matrix p0 = oracles::random_matrix(2, 4, rng);
    Matrix p = p0;
    AdamState st;
    AdamHyper h;
    h.lr = 0.05;
    h.weight_decay = 0.2;
    adamw_step(p, Matrix(2, 4), st, h);
    CHECK(max_abs_diff(p, scale(p0, 1.0 - 0.05 * 0.2)) <= 1e-15);
}

TEST_CASE("one scalar step matches a straight-line evaluation") {
    Matrix p(1, 1);
    p(0, 0) = 1.0;
    Matrix g(1, 1);
    g(0, 0) = 1.0;
    AdamState st;
    AdamHyper h;
    h.lr = 0.1;
    adamw_step(p, g, st, h);

    // Straight-line recurrence with the same hyperparameters.
    const double m = (1.0 - 0.9) * 1.0;
    const double v = (1.0 - 0.999) * 1.0;
    const double m_hat = m / (1.0 - 0.9);
    const double v_hat = v / (1.0 - 0.999);
    const double expected = 1.0 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(p(0, 0) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("two steps track the recurrence with decay") {
    Matrix p(1, 1);
    p(0, 0) = 0.5;
    AdamState st;
    AdamHyper h;
    h.lr = 0.01;
    h.weight_decay = 0.1;
    double m = 0, v = 0, expected = 0.5;
    for (int step = 1; step <= 2; ++step) {
        const double grad = step == 1 ? 0.3 : -0.7;
        Matrix g(1, 1);
        g(0, 0) = grad;
        adamw_step(p, g, st, h);
        m = 0.9 * m + 0.1 * grad;
        v = 0.999 * v + 0.001 * grad * grad;
        const double m_hat = m / (1.0 - std::pow(0.9, step));
        const double v_hat = v / (1.0 - std::pow(0.999, step));
        expected = expected * (1.0 - 0.01 * 0.1) - 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8);
    }
    CHECK(p(0, 0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("shape mismatches are rejected") {
    Matrix p(2, 2), g(3, 2);
    AdamState st;
    CHECK_THROWS_AS(adamw_step(p, g, st, AdamHyper{}), ShapeError);
    std::vector<double> pv(4, 0.0), gv(5, 0.0);
    AdamState st2;
    CHECK_THROWS_AS(adamw_step(pv, gv, st2, AdamHyper{}), ShapeError);
}

TEST_CASE("vector overload matches the matrix path") {
    Rng rng(53);
    const Matrix p0 = oracles::random_matrix(1, 6, rng);
    const Matrix g0 = oracles::random_matrix(1, 6, rng);
    Matrix pm = p0;
    AdamState sm;
    AdamHyper h;
    h.lr = 0.02;
    h.weight_decay = 0.05;
    adamw_step(pm, g0, sm, h);

    std::vector<double> pv = p0.data;
    AdamState sv;
    adamw_step(pv, g0.data, sv, h);
    for (size_t i = 0; i < pv.size(); ++i) CHECK(pv[i] == pm.data[i]);
}

TEST_CASE("fd_gradient basics") {
    Rng rng(54);
    const Matrix p = oracles::random_matrix(2, 3, rng);
    const Matrix ones = fd_gradient(
        [](const Matrix& m) {
            double s = 0.0;
            for (double v : m.data) s += v;
            return s;
        },
        p, 1e-5);
    for (double v : ones.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-8));

    Matrix single(1, 1);
    single(0, 0) = 2.0;
    const Matrix grad = fd_gradient(
        [](const Matrix& m) { return 0.5 * m(0, 0) * m(0, 0); }, single, 1e-5);
    CHECK(grad(0, 0) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK_THROWS_AS(fd_gradient([](const Matrix&) { return 0.0; }, p, 0.0), ParamError);
}

} // TEST_SUITE
