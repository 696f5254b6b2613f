#include "alfa/model.hpp"

#include <algorithm>
#include <cmath>

#include "alfa/errors.hpp"

namespace alfa {

// ---------------------------------------------------------------------------
// Inventories
// ---------------------------------------------------------------------------

std::int64_t LayerSpec::param_count() const {
    switch (kind) {
    case LayerKind::conv: return static_cast<std::int64_t>(m) * n;
    case LayerKind::linear: return static_cast<std::int64_t>(m) * n + m;
    case LayerKind::batchnorm: return 2LL * m;
    }
    return 0;
}

std::int64_t ModelInventory::total_params() const {
    std::int64_t total = 0;
    for (const LayerSpec& l : layers) total += l.param_count();
    return total;
}

namespace {

LayerSpec conv_spec(std::string name, int out_ch, int in_ch, int k, int stride) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::conv;
    s.m = out_ch;
    s.n = in_ch * k * k;
    s.k = k;
    s.stride = stride;
    s.pad = k / 2;
    s.decompose = true;
    return s;
}

LayerSpec bn_spec(std::string name, int channels) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::batchnorm;
    s.m = channels;
    return s;
}

LayerSpec linear_spec(std::string name, int out, int in) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = LayerKind::linear;
    s.m = out;
    s.n = in;
    return s;
}

void push_basic_block(ModelInventory& inv, const std::string& prefix, int ch, int in_ch, bool downsample) {
    inv.layers.push_back(conv_spec(prefix + ".conv1", ch, in_ch, 3, downsample ? 2 : 1));
    inv.layers.push_back(bn_spec(prefix + ".bn1", ch));
    inv.layers.push_back(conv_spec(prefix + ".conv2", ch, ch, 3, 1));
    inv.layers.push_back(bn_spec(prefix + ".bn2", ch));
    if (downsample) {
        inv.layers.push_back(conv_spec(prefix + ".downsample", ch, in_ch, 1, 2));
        inv.layers.push_back(bn_spec(prefix + ".downsample.bn", ch));
    }
}

} // namespace

ModelInventory resnet18_inventory() {
    ModelInventory inv;
    inv.arch = "resnet18";
    inv.layers.push_back(conv_spec("conv1", 64, 3, 7, 2));
    inv.layers.push_back(bn_spec("bn1", 64));
    push_basic_block(inv, "layer1.0", 64, 64, false);
    push_basic_block(inv, "layer1.1", 64, 64, false);
    push_basic_block(inv, "layer2.0", 128, 64, true);
    push_basic_block(inv, "layer2.1", 128, 128, false);
    push_basic_block(inv, "layer3.0", 256, 128, true);
    push_basic_block(inv, "layer3.1", 256, 256, false);
    push_basic_block(inv, "layer4.0", 512, 256, true);
    push_basic_block(inv, "layer4.1", 512, 512, false);
    inv.layers.push_back(linear_spec("fc", 2, 512));
    return inv;
}

ModelInventory minigaze_inventory() {
    ModelInventory inv;
    inv.arch = "minigaze";
    for (int i = 0; i < kNetConvs; ++i) {
        const std::string name = "conv" + std::to_string(i + 1);
        inv.layers.push_back(conv_spec(name, kConvOut[i], kConvIn[i], 3, 1));
        inv.layers.push_back(bn_spec(name + ".affine", kConvOut[i]));
    }
    inv.layers.push_back(linear_spec("head", 2, kConvOut[kNetConvs - 1]));
    return inv;
}

bool is_compressive(int m, int n, int d) {
    return static_cast<std::int64_t>(d) * (m + n) < static_cast<std::int64_t>(m) * n;
}

std::vector<TruncatedLayerSize> truncated_layer_sizes(const ModelInventory& inv, int d) {
    if (d < 1) throw RankError("truncated_size rank must be >= 1");
    std::vector<TruncatedLayerSize> out;
    for (const LayerSpec& l : inv.layers) {
        TruncatedLayerSize t;
        t.name = l.name;
        if (l.kind == LayerKind::conv && l.decompose) {
            t.d_eff = std::min(d, std::min(l.m, l.n));
            t.params = static_cast<std::int64_t>(t.d_eff) * (l.m + l.n);
            t.compressive = is_compressive(l.m, l.n, t.d_eff);
        } else {
            t.d_eff = 0;
            t.params = l.param_count();
            t.compressive = false;
        }
        out.push_back(std::move(t));
    }
    return out;
}

std::int64_t truncated_size(const ModelInventory& inv, int d) {
    std::int64_t total = 0;
    for (const TruncatedLayerSize& t : truncated_layer_sizes(inv, d)) total += t.params;
    return total;
}

std::vector<std::pair<int, int>> conv_shapes(const ModelInventory& inv, bool include_first) {
    std::vector<std::pair<int, int>> shapes;
    bool first = true;
    for (const LayerSpec& l : inv.layers) {
        if (l.kind != LayerKind::conv || !l.decompose) continue;
        if (first && !include_first) {
            first = false;
            continue;
        }
        first = false;
        shapes.emplace_back(l.m, l.n);
    }
    return shapes;
}

// ---------------------------------------------------------------------------
// MiniGazeNet
// ---------------------------------------------------------------------------

MiniGazeNet init_minigaze(Rng& rng) {
    MiniGazeNet net;
    for (int i = 0; i < kNetConvs; ++i) {
        const int n = kConvIn[i] * 9;
        net.conv[i] = Matrix(kConvOut[i], n);
        const double sigma = std::sqrt(2.0 / n);
        for (double& v : net.conv[i].data) v = rng.gaussian(0.0, sigma);
        net.aff[i] = Affine::identity(kConvOut[i]);
    }
    const int feat = kConvOut[kNetConvs - 1];
    // Zero head: outputs start at the origin and grow with the loss signal.
    net.head_w = Matrix(2, feat);
    net.head_b.assign(2, 0.0);
    return net;
}

DecomposedGazeNet decompose_net(const MiniGazeNet& net, int d, std::vector<std::string>* warnings) {
    DecomposedGazeNet out;
    for (int i = 0; i < kNetConvs; ++i) {
        const std::string name = "conv" + std::to_string(i + 1);
        const int limit = std::min(net.conv[i].rows, net.conv[i].cols);
        int d_eff = d;
        if (d_eff > limit) {
            d_eff = limit;
            if (warnings) {
                warnings->push_back(name + ": rank clamped from " + std::to_string(d) + " to " +
                                    std::to_string(limit));
            }
        }
        out.conv[i] = decompose_layer(net.conv[i], d_eff, name);
        out.aff[i] = net.aff[i];
    }
    out.head_w = net.head_w;
    out.head_b = net.head_b;
    return out;
}

namespace {

// 3x3 stride-1 pad-1 convolution with flattened weights (out_ch x in_ch*9).
// One fused pass per (output row, kernel row).
void conv3x3(const Matrix& w, const Tensor3& in, Tensor3& out) {
    const int oc = w.rows;
    const int ic = in.ch;
    if (w.cols != ic * 9) {
        throw ShapeError("conv weight " + w.shape_str() + " vs input channels " + std::to_string(ic));
    }
    out = Tensor3(oc, in.h, in.w);
    const int h = in.h, width = in.w;
    for (int o = 0; o < oc; ++o) {
        double* oplane = out.plane(o);
        for (int c = 0; c < ic; ++c) {
            const double* wrow = &w.data[static_cast<size_t>(o) * w.cols + c * 9];
            const double* iplane = in.plane(c);
            for (int y = 0; y < h; ++y) {
                double* orow = oplane + static_cast<size_t>(y) * width;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = y + ky - 1;
                    if (iy < 0 || iy >= h) continue;
                    const double* irow = iplane + static_cast<size_t>(iy) * width;
                    const double w0 = wrow[ky * 3];
                    const double w1 = wrow[ky * 3 + 1];
                    const double w2 = wrow[ky * 3 + 2];
                    orow[0] += w1 * irow[0] + w2 * irow[1];
                    for (int x = 1; x < width - 1; ++x) {
                        orow[x] += w0 * irow[x - 1] + w1 * irow[x] + w2 * irow[x + 1];
                    }
                    orow[width - 1] += w0 * irow[width - 2] + w1 * irow[width - 1];
                }
            }
        }
    }
}

void conv3x3_backward(const Matrix& w, const Tensor3& in, const Tensor3& dout, Matrix& dw, Tensor3* din) {
    const int oc = w.rows;
    const int ic = in.ch;
    const int h = in.h, width = in.w;
    if (din) *din = Tensor3(ic, h, width);
    for (int o = 0; o < oc; ++o) {
        const double* doplane = dout.plane(o);
        for (int c = 0; c < ic; ++c) {
            double* dwrow = &dw.data[static_cast<size_t>(o) * dw.cols + c * 9];
            const double* wbase = &w.data[static_cast<size_t>(o) * w.cols + c * 9];
            const double* iplane = in.plane(c);
            double* diplane = din ? din->plane(c) : nullptr;
            for (int y = 0; y < h; ++y) {
                const double* dorow = doplane + static_cast<size_t>(y) * width;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = y + ky - 1;
                    if (iy < 0 || iy >= h) continue;
                    const double* irow = iplane + static_cast<size_t>(iy) * width;
                    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0;
                    for (int x = 1; x < width - 1; ++x) {
                        const double g = dorow[x];
                        acc0 += g * irow[x - 1];
                        acc1 += g * irow[x];
                        acc2 += g * irow[x + 1];
                    }
                    {
                        const double g0 = dorow[0];
                        acc1 += g0 * irow[0];
                        acc2 += g0 * irow[1];
                        const double gl = dorow[width - 1];
                        acc0 += gl * irow[width - 2];
                        acc1 += gl * irow[width - 1];
                    }
                    dwrow[ky * 3] += acc0;
                    dwrow[ky * 3 + 1] += acc1;
                    dwrow[ky * 3 + 2] += acc2;
                    if (diplane) {
                        double* dirow = diplane + static_cast<size_t>(iy) * width;
                        const double w0 = wbase[ky * 3];
                        const double w1 = wbase[ky * 3 + 1];
                        const double w2 = wbase[ky * 3 + 2];
                        {
                            const double g0 = dorow[0];
                            dirow[0] += w1 * g0;
                            dirow[1] += w2 * g0;
                        }
                        for (int x = 1; x < width - 1; ++x) {
                            const double g = dorow[x];
                            dirow[x - 1] += w0 * g;
                            dirow[x] += w1 * g;
                            dirow[x + 1] += w2 * g;
                        }
                        {
                            const double gl = dorow[width - 1];
                            dirow[width - 2] += w0 * gl;
                            dirow[width - 1] += w1 * gl;
                        }
                    }
                }
            }
        }
    }
}

void affine_relu(const Affine& a, const Tensor3& in, Tensor3& pre, Tensor3& act) {
    pre = Tensor3(in.ch, in.h, in.w);
    act = Tensor3(in.ch, in.h, in.w);
    const size_t plane = static_cast<size_t>(in.h) * in.w;
    for (int c = 0; c < in.ch; ++c) {
        const double s = a.scale[static_cast<size_t>(c)];
        const double b = a.bias[static_cast<size_t>(c)];
        const double* ip = in.plane(c);
        double* pp = pre.plane(c);
        double* ap = act.plane(c);
        for (size_t i = 0; i < plane; ++i) {
            const double v = s * ip[i] + b;
            pp[i] = v;
            ap[i] = v > 0.0 ? v : 0.0;
        }
    }
}

Tensor3 avg_pool2(const Tensor3& in) {
    Tensor3 out(in.ch, in.h / 2, in.w / 2);
    for (int c = 0; c < in.ch; ++c) {
        for (int y = 0; y < out.h; ++y) {
            for (int x = 0; x < out.w; ++x) {
                const double s = in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) +
                                 in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1);
                out.at(c, y, x) = s * 0.25;
            }
        }
    }
    return out;
}

Tensor3 avg_pool2_backward(const Tensor3& dout, int in_h, int in_w) {
    Tensor3 din(dout.ch, in_h, in_w);
    for (int c = 0; c < dout.ch; ++c) {
        for (int y = 0; y < dout.h; ++y) {
            for (int x = 0; x < dout.w; ++x) {
                const double g = dout.at(c, y, x) * 0.25;
                din.at(c, 2 * y, 2 * x) += g;
                din.at(c, 2 * y, 2 * x + 1) += g;
                din.at(c, 2 * y + 1, 2 * x) += g;
                din.at(c, 2 * y + 1, 2 * x + 1) += g;
            }
        }
    }
    return din;
}

Matrix resolve_conv_weight(const DecomposedLayer& layer, const AdapterSet* adapters, int index) {
    if (adapters && adapters->kind == AdapterKind::alfa && adapters->alfa[static_cast<size_t>(index)]) {
        const Matrix delta = alfa_delta(*adapters->alfa[static_cast<size_t>(index)], layer);
        if (!all_zero(delta)) {
            return matmul(layer.U, add(layer.Vbase, delta));
        }
    } else if (adapters && adapters->kind == AdapterKind::lora && adapters->lora[static_cast<size_t>(index)]) {
        const Matrix delta = lora_delta(*adapters->lora[static_cast<size_t>(index)]);
        if (!all_zero(delta)) {
            return add(reconstruct(layer), delta);
        }
    }
    return reconstruct(layer);
}

} // namespace

NetParams resolve_params(const MiniGazeNet& net) {
    NetParams p;
    p.conv = net.conv;
    p.aff = &net.aff;
    p.head_w = &net.head_w;
    p.head_b = &net.head_b;
    return p;
}

NetParams resolve_params(const DecomposedGazeNet& net, const AdapterSet* adapters) {
    NetParams p;
    for (int i = 0; i < kNetConvs; ++i) {
        p.conv[i] = resolve_conv_weight(net.conv[i], adapters, i);
    }
    p.aff = &net.aff;
    p.head_w = &net.head_w;
    p.head_b = &net.head_b;
    return p;
}

Gaze2 net_forward(const NetParams& p, const Matrix& image, ForwardCache* cache) {
    if (image.rows != kImageSize || image.cols != kImageSize) {
        throw ShapeError("image " + image.shape_str() + ", expected 32x32");
    }
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;

    Tensor3 x(1, kImageSize, kImageSize);
    x.v = image.data;

    Tensor3 act;
    for (int i = 0; i < kNetConvs; ++i) {
        c.conv_in[i] = std::move(x);
        conv3x3(p.conv[i], c.conv_in[i], c.conv_out[i]);
        affine_relu((*p.aff)[i], c.conv_out[i], c.pre_act[i], act);
        if (i + 1 < kNetConvs) {
            x = avg_pool2(act);
        }
    }

    const int feat = act.ch;
    c.gap.assign(static_cast<size_t>(feat), 0.0);
    const double inv_area = 1.0 / (act.h * act.w);
    for (int ch = 0; ch < feat; ++ch) {
        const double* plane = act.plane(ch);
        double s = 0.0;
        for (int i = 0; i < act.h * act.w; ++i) s += plane[i];
        c.gap[static_cast<size_t>(ch)] = s * inv_area;
    }

    Gaze2 out;
    const Matrix& hw = *p.head_w;
    out.yaw = (*p.head_b)[0];
    out.pitch = (*p.head_b)[1];
    for (int j = 0; j < feat; ++j) {
        out.yaw += hw(0, j) * c.gap[static_cast<size_t>(j)];
        out.pitch += hw(1, j) * c.gap[static_cast<size_t>(j)];
    }
    c.out = out;
    return out;
}

NetGrads zero_grads_like(const NetParams& p) {
    NetGrads g;
    for (int i = 0; i < kNetConvs; ++i) {
        g.conv[i] = Matrix(p.conv[i].rows, p.conv[i].cols);
        g.aff[i].scale.assign((*p.aff)[i].scale.size(), 0.0);
        g.aff[i].bias.assign((*p.aff)[i].bias.size(), 0.0);
    }
    g.head_w = Matrix(p.head_w->rows, p.head_w->cols);
    g.head_b.assign(p.head_b->size(), 0.0);
    return g;
}

void net_backward(const NetParams& p, const ForwardCache& cache, const Gaze2& dout, NetGrads& accum) {
    const int feat = kConvOut[kNetConvs - 1];
    const Tensor3& last_pre = cache.pre_act[kNetConvs - 1];
    const double inv_area = 1.0 / (last_pre.h * last_pre.w);

    // Head and global average pooling.
    std::vector<double> dgap(static_cast<size_t>(feat), 0.0);
    const Matrix& hw = *p.head_w;
    for (int j = 0; j < feat; ++j) {
        accum.head_w(0, j) += dout.yaw * cache.gap[static_cast<size_t>(j)];
        accum.head_w(1, j) += dout.pitch * cache.gap[static_cast<size_t>(j)];
        dgap[static_cast<size_t>(j)] = hw(0, j) * dout.yaw + hw(1, j) * dout.pitch;
    }
    accum.head_b[0] += dout.yaw;
    accum.head_b[1] += dout.pitch;

    Tensor3 dact(last_pre.ch, last_pre.h, last_pre.w);
    for (int ch = 0; ch < feat; ++ch) {
        const double g = dgap[static_cast<size_t>(ch)] * inv_area;
        double* plane = dact.plane(ch);
        for (int i = 0; i < dact.h * dact.w; ++i) plane[i] = g;
    }

    for (int i = kNetConvs - 1; i >= 0; --i) {
        const Tensor3& pre = cache.pre_act[i];
        const Tensor3& conv_out = cache.conv_out[i];
        const Affine& aff = (*p.aff)[i];
        const size_t plane = static_cast<size_t>(pre.h) * pre.w;

        // ReLU mask, then affine.
        Tensor3 dconv(conv_out.ch, conv_out.h, conv_out.w);
        for (int ch = 0; ch < pre.ch; ++ch) {
            const double* pp = pre.plane(ch);
            const double* cp = conv_out.plane(ch);
            const double* dp = dact.plane(ch);
            double* dc = dconv.plane(ch);
            double dscale = 0.0, dbias = 0.0;
            const double s = aff.scale[static_cast<size_t>(ch)];
            for (size_t j = 0; j < plane; ++j) {
                const double g = pp[j] > 0.0 ? dp[j] : 0.0;
                dscale += g * cp[j];
                dbias += g;
                dc[j] = g * s;
            }
            accum.aff[i].scale[static_cast<size_t>(ch)] += dscale;
            accum.aff[i].bias[static_cast<size_t>(ch)] += dbias;
        }

        Tensor3 din;
        conv3x3_backward(p.conv[i], cache.conv_in[i], dconv, accum.conv[i], i > 0 ? &din : nullptr);
        if (i > 0) {
            dact = avg_pool2_backward(din, cache.pre_act[i - 1].h, cache.pre_act[i - 1].w);
        }
    }
}

MergedGazeNet merge_adapters(const DecomposedGazeNet& net, const AdapterSet& adapters) {
    MergedGazeNet out;
    for (int i = 0; i < kNetConvs; ++i) {
        AdaptedLayer layer;
        layer.base = net.conv[i];
        if (adapters.kind == AdapterKind::alfa && adapters.alfa[static_cast<size_t>(i)]) {
            layer.adapter = *adapters.alfa[static_cast<size_t>(i)];
        } else if (adapters.kind == AdapterKind::lora && adapters.lora[static_cast<size_t>(i)]) {
            layer.adapter = *adapters.lora[static_cast<size_t>(i)];
        }
        out.conv[i] = merged_weight(layer);
        out.aff[i] = net.aff[i];
    }
    out.head_w = net.head_w;
    out.head_b = net.head_b;
    return out;
}

Gaze2 forward(const MiniGazeNet& net, const Matrix& image) {
    return net_forward(resolve_params(net), image);
}

Gaze2 forward(const DecomposedGazeNet& net, const Matrix& image, ForwardMode mode, const AdapterSet* adapters) {
    if (mode == ForwardMode::merged) {
        static const AdapterSet kNone;
        return forward(merge_adapters(net, adapters ? *adapters : kNone), image);
    }
    return net_forward(resolve_params(net, mode == ForwardMode::adapted ? adapters : nullptr), image);
}

Gaze2 forward(const MergedGazeNet& net, const Matrix& image) {
    NetParams p;
    for (int i = 0; i < kNetConvs; ++i) {
        if (const auto* fact = std::get_if<DecomposedLayer>(&net.conv[i])) {
            p.conv[i] = reconstruct(*fact);
        } else {
            p.conv[i] = std::get<Matrix>(net.conv[i]);
        }
    }
    p.aff = &net.aff;
    p.head_w = &net.head_w;
    p.head_b = &net.head_b;
    return net_forward(p, image);
}

} // namespace alfa
