#pragma once

#include <functional>

#include "alfa/matrix.hpp"

namespace alfa {

struct AdamState {
    Matrix m; // first moment
    Matrix v; // second moment
    long step = 0;

    static AdamState like(const Matrix& p) {
        AdamState s;
        s.m = Matrix(p.rows, p.cols);
        s.v = Matrix(p.rows, p.cols);
        return s;
    }
};

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// One AdamW update in place. Decoupled weight decay: the parameter is scaled
// by (1 - lr * weight_decay) before the bias-corrected Adam update. Plain
// Adam is the weight_decay = 0 case.
void adamw_step(Matrix& param, const Matrix& grad, AdamState& state, const AdamHyper& h);

// Same update for flat vector parameters (affine scales/biases, head bias).
void adamw_step(std::vector<double>& param, const std::vector<double>& grad, AdamState& state,
                const AdamHyper& h);

// Central-difference gradient of a scalar function of one matrix:
// (f(p + h e_ij) - f(p - h e_ij)) / (2h) per entry. Oracle for backward().
Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& p, double h);

} // namespace alfa
