#include <doctest.h>

#include <cmath>
#include <functional>

#include "alfa/errors.hpp"
#include "alfa/optim.hpp"
#include "alfa/tape.hpp"
#include "oracles.hpp"

using namespace alfa;

namespace {

// Max relative error between an analytic gradient and central differences.
double gradcheck(const std::function<double(const std::vector<Matrix>&)>& f,
                 const std::vector<Matrix>& params, const std::vector<Matrix>& grads, double h = 1e-5) {
    double worst = 0.0;
    for (size_t p = 0; p < params.size(); ++p) {
        std::vector<Matrix> work = params;
        const Matrix fd = fd_gradient(
            [&](const Matrix& m) {
                work[p] = m;
                return f(work);
            },
            params[p], h);
        for (size_t i = 0; i < fd.data.size(); ++i) {
            worst = std::max(worst, oracles::rel_err(grads[p].data[i], fd.data[i], 1e-4));
        }
    }
    return worst;
}

} // namespace

TEST_SUITE("tape") {

TEST_CASE("quadratic loss gradient equals the parameter") {
    Rng rng(8);
    const Matrix p = oracles::random_matrix(6, 1, rng);
    Tape t;
    const auto pn = t.parameter(p, "p");
    const auto loss = t.scale(t.matmul(t.transpose(pn), pn), 0.5);
    const auto grads = t.backward(loss);
    CHECK(max_abs_diff(grads[0].second, p) <= 1e-12);
}

TEST_CASE("parameters the loss does not reach get zero gradients") {
    Rng rng(9);
    Tape t;
    const auto used = t.parameter(oracles::random_matrix(2, 2, rng), "used");
    const auto unused = t.parameter(oracles::random_matrix(3, 3, rng), "unused");
    (void)unused;
    const auto loss = t.l1_mean(used);
    const auto grads = t.backward(loss);
    REQUIRE(grads.size() == 2);
    CHECK(grads[1].first == "unused");
    CHECK(all_zero(grads[1].second));
}

TEST_CASE("backward requires a scalar loss") {
    Tape t;
    const auto p = t.parameter(Matrix(2, 2), "p");
    CHECK_THROWS_AS(t.backward(p), ContractError);
}

TEST_CASE("l1_mean subgradient at zero is zero") {
    Matrix p(2, 2);
    p(0, 0) = 1.5;
    p(1, 1) = -0.5; // others exactly zero
    Tape t;
    const auto pn = t.parameter(p, "p");
    const auto grads = t.backward(t.l1_mean(pn));
    const Matrix& g = grads[0].second;
    CHECK(g(0, 0) == 0.25);
    CHECK(g(1, 1) == -0.25);
    CHECK(g(0, 1) == 0.0);
    CHECK(g(1, 0) == 0.0);
}

TEST_CASE("every primitive agrees with central differences") {
    Rng rng(14);
    const Matrix p0 = oracles::random_matrix(3, 4, rng, 0.6);
    const Matrix c0 = oracles::random_matrix(4, 3, rng, 0.6);

    const auto build = [&](Tape& t, const Matrix& p) {
        const auto pn = t.parameter(p, "p");
        const auto cn = t.constant(c0);
        const auto prod = t.matmul(pn, cn);            // 3x3
        const auto sm = t.softmax_rows(t.scale(prod, 0.7));
        const auto mix = t.add(sm, t.transpose(prod)); // 3x3
        const auto stacked = t.stack_rows({mix, sm});  // 6x3
        return t.scale(t.l1_mean(stacked), 2.0);
    };

    Tape t;
    const auto loss = build(t, p0);
    const auto grads = t.backward(loss);
    const double worst = gradcheck(
        [&](const std::vector<Matrix>& ps) {
            Tape local;
            return local.value(build(local, ps[0]))(0, 0);
        },
        {p0}, {grads[0].second});
    CHECK(worst <= 1e-4);
}

TEST_CASE("composed graphs of depth 12 agree with central differences") {
    Rng rng(15);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix p0 = oracles::random_matrix(3, 3, rng, 0.5);
        const Matrix c0 = oracles::random_matrix(3, 3, rng, 0.5);
        const auto build = [&](Tape& t, const Matrix& p) {
            auto node = t.parameter(p, "p");
            const auto cn = t.constant(c0);
            for (int depth = 0; depth < 11; ++depth) {
                switch (depth % 4) {
                case 0: node = t.matmul(node, cn); break;
                case 1: node = t.softmax_rows(node); break;
                case 2: node = t.add(t.transpose(node), cn); break;
                default: node = t.scale(node, 0.8); break;
                }
            }
            return t.l1_mean(node);
        };
        Tape t;
        const auto grads = t.backward(build(t, p0));
        const double worst = gradcheck(
            [&](const std::vector<Matrix>& ps) {
                Tape local;
                return local.value(build(local, ps[0]))(0, 0);
            },
            {p0}, {grads[0].second});
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("backward_from seeds an external adjoint") {
    Rng rng(16);
    const Matrix p0 = oracles::random_matrix(2, 3, rng);
    const Matrix seed = oracles::random_matrix(2, 3, rng);
    Tape t;
    const auto pn = t.parameter(p0, "p");
    const auto scaled = t.scale(pn, 3.0);
    const auto grads = t.backward_from(scaled, seed);
    CHECK(max_abs_diff(grads[0].second, scale(seed, 3.0)) <= 1e-14);
    CHECK_THROWS_AS(t.backward_from(scaled, Matrix(3, 2)), ShapeError);
}

} // TEST_SUITE
