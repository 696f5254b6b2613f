#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "alfa/adapters.hpp"
#include "alfa/decompose.hpp"
#include "alfa/matrix.hpp"
#include "alfa/rng.hpp"

namespace alfa {

// ---------------------------------------------------------------------------
// Layer-shape inventories (parameter accounting)
// ---------------------------------------------------------------------------

enum class LayerKind { conv, linear, batchnorm };

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::conv;
    int m = 0; // output width (channels / outputs)
    int n = 0; // flattened input width (in_ch * k * k for conv)
    int k = 0;
    int stride = 1;
    int pad = 0;
    bool decompose = false;

    std::int64_t param_count() const;
};

struct ModelInventory {
    std::string arch;
    std::vector<LayerSpec> layers;

    std::int64_t total_params() const;
};

// The 20-convolution residual-18 geometry with a 2-output gaze head.
// Shapes only; used for parameter accounting, never trained here.
ModelInventory resnet18_inventory();
ModelInventory minigaze_inventory();

bool is_compressive(int m, int n, int d); // d * (m + n) < m * n

struct TruncatedLayerSize {
    std::string name;
    int d_eff = 0; // rank after clamping to min(m, n)
    std::int64_t params = 0;
    bool compressive = false;
};

// Stored size after decomposing every flagged conv at rank d (clamped per
// layer), keeping batchnorm and head parameters full.
std::int64_t truncated_size(const ModelInventory& inv, int d);
std::vector<TruncatedLayerSize> truncated_layer_sizes(const ModelInventory& inv, int d);

// (m, n) shapes of decomposed convs, optionally skipping the stem conv;
// the adapted-layer set used by the parameter accountants.
std::vector<std::pair<int, int>> conv_shapes(const ModelInventory& inv, bool include_first);

// ---------------------------------------------------------------------------
// Runnable desk-scale gaze network
// ---------------------------------------------------------------------------

// Channel-major activation block.
struct Tensor3 {
    int ch = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor3() = default;
    Tensor3(int c, int hh, int ww) : ch(c), h(hh), w(ww), v(static_cast<size_t>(c) * hh * ww, 0.0) {}
    double& at(int c, int y, int x) { return v[(static_cast<size_t>(c) * h + y) * w + x]; }
    double at(int c, int y, int x) const { return v[(static_cast<size_t>(c) * h + y) * w + x]; }
    double* plane(int c) { return &v[static_cast<size_t>(c) * h * w]; }
    const double* plane(int c) const { return &v[static_cast<size_t>(c) * h * w]; }
};

// Per-channel affine (batchnorm stand-in: no running statistics).
struct Affine {
    std::vector<double> scale;
    std::vector<double> bias;

    static Affine identity(int channels) {
        Affine a;
        a.scale.assign(static_cast<size_t>(channels), 1.0);
        a.bias.assign(static_cast<size_t>(channels), 0.0);
        return a;
    }
};

struct Gaze2 {
    double yaw = 0.0;
    double pitch = 0.0;
};

inline constexpr int kImageSize = 32;
inline constexpr int kNetConvs = 3;
// Flattened conv weight shapes: 8x(1*3*3), 16x(8*3*3), 32x(16*3*3).
inline constexpr int kConvOut[kNetConvs] = {8, 16, 32};
inline constexpr int kConvIn[kNetConvs] = {1, 8, 16};

// conv(1->8) / pool / conv(8->16) / pool / conv(16->32) / GAP / linear(32->2),
// ReLU activations, 3x3 stride-1 pad-1 convs, 2x2 average pooling.
struct MiniGazeNet {
    std::array<Matrix, kNetConvs> conv; // out_ch x in_ch*9
    std::array<Affine, kNetConvs> aff;
    Matrix head_w; // 2 x 32
    std::vector<double> head_b; // 2
};

MiniGazeNet init_minigaze(Rng& rng);

// Same topology with every conv held in truncated factors.
struct DecomposedGazeNet {
    std::array<DecomposedLayer, kNetConvs> conv;
    std::array<Affine, kNetConvs> aff;
    Matrix head_w;
    std::vector<double> head_b;
};

// Decomposes every conv at rank d (clamped per layer to min(m, n); a note is
// appended to `warnings` for each clamp).
DecomposedGazeNet decompose_net(const MiniGazeNet& net, int d, std::vector<std::string>* warnings = nullptr);

enum class AdapterKind { none, lora, alfa };

struct AdapterSet {
    AdapterKind kind = AdapterKind::none;
    std::array<std::optional<AlfaAdapter>, kNetConvs> alfa;
    std::array<std::optional<LoraAdapter>, kNetConvs> lora;

    bool empty() const { return kind == AdapterKind::none; }
};

enum class ForwardMode { base, adapted, merged };

// Effective full conv weights plus the shared tail parameters; every forward
// and backward path runs on this resolved view.
struct NetParams {
    std::array<Matrix, kNetConvs> conv;
    const std::array<Affine, kNetConvs>* aff = nullptr;
    const Matrix* head_w = nullptr;
    const std::vector<double>* head_b = nullptr;
};

NetParams resolve_params(const MiniGazeNet& net);
NetParams resolve_params(const DecomposedGazeNet& net, const AdapterSet* adapters);

struct ForwardCache {
    std::array<Tensor3, kNetConvs> conv_in;
    std::array<Tensor3, kNetConvs> conv_out;
    std::array<Tensor3, kNetConvs> pre_act; // affine output, pre-ReLU
    std::vector<double> gap;
    Gaze2 out;
};

Gaze2 net_forward(const NetParams& p, const Matrix& image, ForwardCache* cache = nullptr);

struct NetGrads {
    std::array<Matrix, kNetConvs> conv;
    std::array<Affine, kNetConvs> aff;
    Matrix head_w;
    std::vector<double> head_b;
};

NetGrads zero_grads_like(const NetParams& p);

// Accumulates parameter gradients for one image into `accum` given the
// adjoint of the (yaw, pitch) output.
void net_backward(const NetParams& p, const ForwardCache& cache, const Gaze2& dout, NetGrads& accum);

// Per-layer merge of an adapter set: attentive adapters stay in factors, the
// plain low-rank ones force full expansion.
struct MergedGazeNet {
    std::array<std::variant<DecomposedLayer, Matrix>, kNetConvs> conv;
    std::array<Affine, kNetConvs> aff;
    Matrix head_w;
    std::vector<double> head_b;
};

MergedGazeNet merge_adapters(const DecomposedGazeNet& net, const AdapterSet& adapters);

Gaze2 forward(const MiniGazeNet& net, const Matrix& image);
Gaze2 forward(const DecomposedGazeNet& net, const Matrix& image, ForwardMode mode = ForwardMode::base,
              const AdapterSet* adapters = nullptr);
Gaze2 forward(const MergedGazeNet& net, const Matrix& image);

} // namespace alfa
