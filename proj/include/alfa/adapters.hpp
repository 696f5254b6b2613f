#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "alfa/decompose.hpp"
#include "alfa/matrix.hpp"
#include "alfa/rng.hpp"
#include "alfa/tape.hpp"

namespace alfa {

// Multi-head attentive adapter over a layer's basis rows. Per head, a pair of
// low-rank query projections; a shared pair of output projections folds the
// stacked head outputs back into a d x n residual on Vbase. All B factors
// start at zero, so a fresh adapter leaves the model's function unchanged.
struct AlfaAdapter {
    int H = 0; // head count
    int r = 0; // adapter rank
    int d = 0; // basis rank of the host layer
    int n = 0; // input width of the host layer
    std::vector<Matrix> A_Q; // H of r x d
    std::vector<Matrix> B_Q; // H of d x r
    Matrix A_P;              // rH x Hd
    Matrix B_P;              // d x rH

    std::int64_t param_count() const;
};

// Plain low-rank adapter: delta = A * B on the full m x n weight. B starts
// at zero.
struct LoraAdapter {
    int r = 0;
    Matrix A; // m x r
    Matrix B; // r x n
};

struct AdaptedLayer {
    DecomposedLayer base;
    std::variant<std::monostate, AlfaAdapter, LoraAdapter> adapter;
};

AlfaAdapter init_alfa(int d, int n, int H, int r, double sigma, Rng& rng);
LoraAdapter init_lora(int m, int n, int r, double sigma, Rng& rng);

// Learnable residual on Vbase: per head, queries attend over the basis rows
// (keys = Vbase, values = Vbase^T, scores scaled by 1/sqrt(n)); the stacked
// head outputs are projected back to d x n through B_P * A_P.
Matrix alfa_delta(const AlfaAdapter& adapter, const DecomposedLayer& base);

// Attention matrix of one head (d x d, rows sum to 1).
Matrix alfa_attention(const AlfaAdapter& adapter, const DecomposedLayer& base, int head);

Matrix lora_delta(const LoraAdapter& adapter);

// Merge result: the attentive adapter folds into the factors without leaving
// truncated form; the plain low-rank adapter forces full expansion.
std::variant<DecomposedLayer, Matrix> merged_weight(const AdaptedLayer& layer);

// Closed-form tuned-parameter count: layers * H * r * d * (H + 3).
std::int64_t alfa_param_count(int H, int r, int d, int layers);

// Sum of r * (m + n) over the adapted layer shapes.
std::int64_t lora_param_count(int r, const std::vector<std::pair<int, int>>& shapes);

// Indices of the k basis rows receiving the most attention mass in one head
// (column sums of the head's attention matrix). Ties break to lower index.
std::vector<int> head_topk(const AlfaAdapter& adapter, const DecomposedLayer& base, int head, int k);

// Tape graph computing alfa_delta for gradient work. Parameter nodes are
// registered in canonical order: A_Q.h, B_Q.h per head, then A_P, B_P.
struct AlfaGraph {
    Tape tape;
    Tape::NodeId z = -1;     // stacked head outputs, Hd x n
    Tape::NodeId delta = -1; // d x n residual
};
AlfaGraph build_alfa_graph(const AlfaAdapter& adapter, const DecomposedLayer& base);

// Writes gradients named as in build_alfa_graph back into adapter-shaped
// matrices, in the same canonical order as adapter tensors.
struct AlfaGrads {
    std::vector<Matrix> A_Q;
    std::vector<Matrix> B_Q;
    Matrix A_P;
    Matrix B_P;
};
AlfaGrads alfa_grads_from(const std::vector<std::pair<std::string, Matrix>>& named, const AlfaAdapter& shape);

} // namespace alfa
