#include "alfa/optim.hpp"

#include <cmath>

#include "alfa/errors.hpp"

namespace alfa {

namespace {

void adamw_core(double* param, const double* grad, AdamState& state, const AdamHyper& h, size_t count) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
    const double decay = 1.0 - h.lr * h.weight_decay;

    for (size_t i = 0; i < count; ++i) {
        const double g = grad[i];
        double& m = state.m.data[i];
        double& v = state.v.data[i];
        m = h.beta1 * m + (1.0 - h.beta1) * g;
        v = h.beta2 * v + (1.0 - h.beta2) * g * g;
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        double p = param[i] * decay;
        p -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
        param[i] = p;
    }
}

} // namespace

void adamw_step(Matrix& param, const Matrix& grad, AdamState& state, const AdamHyper& h) {
    if (!same_shape(param, grad)) {
        throw ShapeError("adamw_step param " + param.shape_str() + " vs grad " + grad.shape_str());
    }
    if (state.m.data.empty()) state = AdamState::like(param);
    if (!same_shape(param, state.m)) {
        throw ShapeError("adamw_step param " + param.shape_str() + " vs state " + state.m.shape_str());
    }
    if (h.lr <= 0.0) throw ParamError("adamw_step lr must be positive");
    adamw_core(param.data.data(), grad.data.data(), state, h, param.data.size());
}

void adamw_step(std::vector<double>& param, const std::vector<double>& grad, AdamState& state,
                const AdamHyper& h) {
    if (param.size() != grad.size()) {
        throw ShapeError("adamw_step param size " + std::to_string(param.size()) + " vs grad size " +
                         std::to_string(grad.size()));
    }
    if (state.m.data.empty()) {
        state.m = Matrix(1, static_cast<int>(param.size()));
        state.v = Matrix(1, static_cast<int>(param.size()));
    }
    if (state.m.data.size() != param.size()) {
        throw ShapeError("adamw_step param size " + std::to_string(param.size()) + " vs state size " +
                         std::to_string(state.m.data.size()));
    }
    if (h.lr <= 0.0) throw ParamError("adamw_step lr must be positive");
    adamw_core(param.data(), grad.data(), state, h, param.size());
}

Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& p, double h) {
    if (h <= 0.0) throw ParamError("fd_gradient step must be positive");
    Matrix grad(p.rows, p.cols);
    Matrix work = p;
    for (size_t i = 0; i < p.data.size(); ++i) {
        const double saved = work.data[i];
        work.data[i] = saved + h;
        const double up = f(work);
        work.data[i] = saved - h;
        const double down = f(work);
        work.data[i] = saved;
        grad.data[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

} // namespace alfa
