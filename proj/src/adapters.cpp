#include "alfa/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alfa/errors.hpp"

namespace alfa {

namespace {

Matrix gaussian_matrix(int rows, int cols, double sigma, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.gaussian(0.0, sigma);
    return m;
}

void check_compatible(const AlfaAdapter& adapter, const DecomposedLayer& base) {
    if (adapter.d != base.d || adapter.n != base.n) {
        throw ShapeError("adapter (d=" + std::to_string(adapter.d) + ", n=" + std::to_string(adapter.n) +
                         ") vs layer (d=" + std::to_string(base.d) + ", n=" + std::to_string(base.n) + ")");
    }
}

} // namespace

std::int64_t AlfaAdapter::param_count() const {
    std::int64_t total = 0;
    for (const Matrix& m : A_Q) total += static_cast<std::int64_t>(m.size());
    for (const Matrix& m : B_Q) total += static_cast<std::int64_t>(m.size());
    total += static_cast<std::int64_t>(A_P.size());
    total += static_cast<std::int64_t>(B_P.size());
    return total;
}

AlfaAdapter init_alfa(int d, int n, int H, int r, double sigma, Rng& rng) {
    if (d < 1 || n < 1 || H < 1 || r < 1 || sigma <= 0.0) {
        throw ParamError("init_alfa: d, n, H, r must be >= 1 and sigma > 0");
    }
    AlfaAdapter a;
    a.H = H;
    a.r = r;
    a.d = d;
    a.n = n;
    a.A_Q.reserve(static_cast<size_t>(H));
    a.B_Q.reserve(static_cast<size_t>(H));
    for (int h = 0; h < H; ++h) {
        a.A_Q.push_back(gaussian_matrix(r, d, sigma, rng));
        a.B_Q.push_back(Matrix(d, r));
    }
    a.A_P = gaussian_matrix(r * H, H * d, sigma, rng);
    a.B_P = Matrix(d, r * H);
    return a;
}

LoraAdapter init_lora(int m, int n, int r, double sigma, Rng& rng) {
    if (m < 1 || n < 1 || r < 1 || sigma <= 0.0) {
        throw ParamError("init_lora: m, n, r must be >= 1 and sigma > 0");
    }
    LoraAdapter a;
    a.r = r;
    a.A = gaussian_matrix(m, r, sigma, rng);
    a.B = Matrix(r, n);
    return a;
}

Matrix alfa_attention(const AlfaAdapter& adapter, const DecomposedLayer& base, int head) {
    check_compatible(adapter, base);
    if (head < 0 || head >= adapter.H) {
        throw IndexError("head " + std::to_string(head) + " out of range [0, " + std::to_string(adapter.H) + ")");
    }
    const Matrix q = matmul(matmul(adapter.B_Q[static_cast<size_t>(head)], adapter.A_Q[static_cast<size_t>(head)]),
                            base.Vbase);
    const Matrix scores = scale(matmul(q, transpose(base.Vbase)), 1.0 / std::sqrt(static_cast<double>(adapter.n)));
    return softmax_rows(scores);
}

Matrix alfa_delta(const AlfaAdapter& adapter, const DecomposedLayer& base) {
    check_compatible(adapter, base);
    const Matrix vbase_t = transpose(base.Vbase);
    Matrix z(adapter.H * adapter.d, adapter.n);
    for (int h = 0; h < adapter.H; ++h) {
        const Matrix attn = alfa_attention(adapter, base, h);
        const Matrix z_h = matmul(vbase_t, transpose(attn)); // n x d
        const Matrix z_h_t = transpose(z_h);                 // d x n
        for (int i = 0; i < adapter.d; ++i)
            for (int j = 0; j < adapter.n; ++j) z(h * adapter.d + i, j) = z_h_t(i, j);
    }
    return matmul(matmul(adapter.B_P, adapter.A_P), z);
}

Matrix lora_delta(const LoraAdapter& adapter) { return matmul(adapter.A, adapter.B); }

std::variant<DecomposedLayer, Matrix> merged_weight(const AdaptedLayer& layer) {
    if (std::holds_alternative<std::monostate>(layer.adapter)) {
        return layer.base;
    }
    if (const auto* alfa = std::get_if<AlfaAdapter>(&layer.adapter)) {
        DecomposedLayer merged = layer.base;
        const Matrix delta = alfa_delta(*alfa, layer.base);
        if (!all_zero(delta)) {
            merged.Vbase = add(merged.Vbase, delta);
        }
        return merged;
    }
    const auto& lora = std::get<LoraAdapter>(layer.adapter);
    return add(reconstruct(layer.base), lora_delta(lora));
}

std::int64_t alfa_param_count(int H, int r, int d, int layers) {
    return static_cast<std::int64_t>(layers) * H * r * d * (H + 3);
}

std::int64_t lora_param_count(int r, const std::vector<std::pair<int, int>>& shapes) {
    std::int64_t total = 0;
    for (const auto& [m, n] : shapes) total += static_cast<std::int64_t>(r) * (m + n);
    return total;
}

std::vector<int> head_topk(const AlfaAdapter& adapter, const DecomposedLayer& base, int head, int k) {
    if (k < 1 || k > adapter.d) {
        throw IndexError("top-k count " + std::to_string(k) + " out of range [1, " + std::to_string(adapter.d) + "]");
    }
    const Matrix attn = alfa_attention(adapter, base, head); // validates head
    std::vector<double> mass(static_cast<size_t>(adapter.d), 0.0);
    for (int i = 0; i < attn.rows; ++i)
        for (int j = 0; j < attn.cols; ++j) mass[static_cast<size_t>(j)] += attn(i, j);
    std::vector<int> order(static_cast<size_t>(adapter.d));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return mass[static_cast<size_t>(a)] > mass[static_cast<size_t>(b)]; });
    order.resize(static_cast<size_t>(k));
    return order;
}

AlfaGraph build_alfa_graph(const AlfaAdapter& adapter, const DecomposedLayer& base) {
    check_compatible(adapter, base);
    AlfaGraph g;
    Tape& t = g.tape;
    const auto vbase = t.constant(base.Vbase);
    const auto vbase_t = t.transpose(vbase);
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(adapter.n));

    std::vector<Tape::NodeId> parts;
    parts.reserve(static_cast<size_t>(adapter.H));
    std::vector<Tape::NodeId> a_q(static_cast<size_t>(adapter.H));
    std::vector<Tape::NodeId> b_q(static_cast<size_t>(adapter.H));
    for (int h = 0; h < adapter.H; ++h) {
        const std::string tag = std::to_string(h);
        a_q[static_cast<size_t>(h)] = t.parameter(adapter.A_Q[static_cast<size_t>(h)], "A_Q." + tag);
        b_q[static_cast<size_t>(h)] = t.parameter(adapter.B_Q[static_cast<size_t>(h)], "B_Q." + tag);
    }
    const auto a_p = t.parameter(adapter.A_P, "A_P");
    const auto b_p = t.parameter(adapter.B_P, "B_P");

    for (int h = 0; h < adapter.H; ++h) {
        const auto q = t.matmul(t.matmul(b_q[static_cast<size_t>(h)], a_q[static_cast<size_t>(h)]), vbase);
        const auto scores = t.scale(t.matmul(q, vbase_t), inv_sqrt_n);
        const auto attn = t.softmax_rows(scores);
        const auto z_h = t.matmul(vbase_t, t.transpose(attn));
        parts.push_back(t.transpose(z_h));
    }
    g.z = t.stack_rows(parts);
    g.delta = t.matmul(t.matmul(b_p, a_p), g.z);
    return g;
}

AlfaGrads alfa_grads_from(const std::vector<std::pair<std::string, Matrix>>& named, const AlfaAdapter& shape) {
    AlfaGrads g;
    g.A_Q.resize(static_cast<size_t>(shape.H));
    g.B_Q.resize(static_cast<size_t>(shape.H));
    for (const auto& [name, grad] : named) {
        if (name == "A_P") {
            g.A_P = grad;
        } else if (name == "B_P") {
            g.B_P = grad;
        } else if (name.rfind("A_Q.", 0) == 0) {
            g.A_Q[static_cast<size_t>(std::stoi(name.substr(4)))] = grad;
        } else if (name.rfind("B_Q.", 0) == 0) {
            g.B_Q[static_cast<size_t>(std::stoi(name.substr(4)))] = grad;
        }
    }
    return g;
}

} // namespace alfa
