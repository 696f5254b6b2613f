#include "alfa/ttp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "alfa/errors.hpp"
#include "alfa/optim.hpp"

namespace alfa {

namespace {

// Seed-stream tags; every phase and user gets an independent generator.
constexpr std::uint64_t kStreamSourceProfile = 1'000'000;
constexpr std::uint64_t kStreamSourceSamples = 2'000'000;
constexpr std::uint64_t kStreamPretrain = 3'000'000;
constexpr std::uint64_t kStreamEvalProfile = 4'000'000;
constexpr std::uint64_t kStreamEvalSamples = 5'000'000;
constexpr std::uint64_t kStreamPersonalize = 6'000'000;

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct NetAdamStates {
    std::array<AdamState, kNetConvs> conv;
    std::array<AdamState, kNetConvs> aff_scale;
    std::array<AdamState, kNetConvs> aff_bias;
    AdamState head_w;
    AdamState head_b;
};

// Mean per-sample L1 on (yaw, pitch) over a set, forward only.
double dataset_l1(const NetParams& p, const std::vector<GazeSample>& data) {
    double total = 0.0;
    for (const GazeSample& s : data) {
        const Gaze2 out = net_forward(p, s.image);
        total += std::abs(out.yaw - s.yaw) + std::abs(out.pitch - s.pitch);
    }
    return total / static_cast<double>(data.size());
}

// One mini-batch of supervised L1 training: accumulates gradients and
// returns the batch loss.
double batch_l1_backward(const NetParams& p, const std::vector<GazeSample>& data,
                         const std::vector<int>& batch, NetGrads& grads) {
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(batch.size());
    ForwardCache cache;
    for (int idx : batch) {
        const GazeSample& s = data[static_cast<size_t>(idx)];
        const Gaze2 out = net_forward(p, s.image, &cache);
        const double ey = out.yaw - s.yaw;
        const double ep = out.pitch - s.pitch;
        loss += std::abs(ey) + std::abs(ep);
        Gaze2 dout;
        dout.yaw = sign_of(ey) * inv;
        dout.pitch = sign_of(ep) * inv;
        net_backward(p, cache, dout, grads);
    }
    return loss * inv;
}

std::vector<std::vector<int>> make_batches(size_t count, int batch_size, Rng& rng) {
    std::vector<int> order(count);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (size_t at = 0; at < count; at += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(count, at + static_cast<size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<long>(at), order.begin() + static_cast<long>(end));
    }
    return batches;
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) out.push_back(token);
    }
    return out;
}

} // namespace

void validate(const TrainConfig& cfg) {
    if (cfg.scenario != "full-pose" && cfg.scenario != "frontal-only") {
        throw ConfigError("scenario must be full-pose or frontal-only, got '" + cfg.scenario + "'");
    }
    if (cfg.adapter != "none" && cfg.adapter != "lora" && cfg.adapter != "alfa") {
        throw ConfigError("adapter must be none, lora or alfa, got '" + cfg.adapter + "'");
    }
    for (const std::string& m : split_csv_list(cfg.benchmark_methods)) {
        if (m != "none" && m != "lora" && m != "alfa") {
            throw ConfigError("benchmark_methods entry '" + m + "' is not none/lora/alfa");
        }
    }
    if (cfg.shots < 1) throw ConfigError("shots must be >= 1");
    if (cfg.lr <= 0.0 || cfg.personalize_lr <= 0.0 || cfg.recover_lr <= 0.0) {
        throw ConfigError("learning rates must be positive");
    }
    if (cfg.epochs < 0 || cfg.recover_epochs < 0 || cfg.personalize_steps < 0) {
        throw ConfigError("epoch/step counts must be >= 0");
    }
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (cfg.svd_rank < 1) throw ConfigError("svd_rank must be >= 1");
    if (cfg.heads < 1 || cfg.adapter_rank < 1) throw ConfigError("heads and adapter_rank must be >= 1");
    if (cfg.source_users < 1 || cfg.samples_per_user < 1) {
        throw ConfigError("source population must be non-empty");
    }
    if (cfg.eval_users < 1 || cfg.eval_samples < 1) throw ConfigError("evaluation set must be non-empty");
    if (cfg.shift_margin < 0.0) throw ConfigError("shift_margin must be >= 0");
    if (cfg.pose_correlation < -1.0 || cfg.pose_correlation > 1.0) {
        throw ConfigError("pose_correlation must be in [-1, 1]");
    }
    if (cfg.translate_px < 0) throw ConfigError("translate_px must be >= 0");
    if (cfg.brightness_jitter < 0.0 || cfg.noise_sigma < 0.0) {
        throw ConfigError("augmentation magnitudes must be >= 0");
    }
}

AdapterKind adapter_kind_from(const std::string& name) {
    if (name == "none") return AdapterKind::none;
    if (name == "lora") return AdapterKind::lora;
    if (name == "alfa") return AdapterKind::alfa;
    throw ConfigError("unknown adapter kind '" + name + "'");
}

std::vector<GazeSample> make_source_population(const TrainConfig& cfg) {
    std::vector<GazeSample> out;
    out.reserve(static_cast<size_t>(cfg.source_users) * cfg.samples_per_user);
    for (int u = 0; u < cfg.source_users; ++u) {
        Rng prof_rng = Rng::derive(cfg.seed, kStreamSourceProfile + static_cast<std::uint64_t>(u));
        const UserProfile profile = sample_source_profile(u, prof_rng);
        Rng samp_rng = Rng::derive(cfg.seed, kStreamSourceSamples + static_cast<std::uint64_t>(u));
        std::vector<GazeSample> samples =
            gen_user_samples(profile, cfg.samples_per_user, samp_rng, -1.0, -1.0, cfg.pose_correlation);
        out.insert(out.end(), std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.end()));
    }
    return out;
}

UserProfile source_profile_for(const TrainConfig& cfg, int user_id) {
    Rng prof_rng = Rng::derive(cfg.seed, kStreamSourceProfile + static_cast<std::uint64_t>(user_id));
    return sample_source_profile(user_id, prof_rng);
}

std::vector<GazeSample> source_samples_for(const TrainConfig& cfg, int user_id, int count) {
    const UserProfile profile = source_profile_for(cfg, user_id);
    Rng samp_rng = Rng::derive(cfg.seed, kStreamSourceSamples + static_cast<std::uint64_t>(user_id));
    return gen_user_samples(profile, count, samp_rng, -1.0, -1.0, cfg.pose_correlation);
}

EvalUser make_eval_user(const TrainConfig& cfg, int user_id) {
    EvalUser user;
    Rng prof_rng = Rng::derive(cfg.seed, kStreamEvalProfile + static_cast<std::uint64_t>(user_id));
    user.profile = sample_shifted_profile(user_id, cfg.shift_margin, prof_rng);

    Rng samp_rng = Rng::derive(cfg.seed, kStreamEvalSamples + static_cast<std::uint64_t>(user_id));
    const bool frontal = cfg.scenario == "frontal-only";
    user.shots = gen_user_samples(user.profile, cfg.shots, samp_rng,
                                  frontal ? kFrontalYawMax : -1.0, frontal ? kFrontalPitchMax : -1.0);
    user.test = gen_user_samples(user.profile, cfg.eval_samples, samp_rng);
    user.shot_indices.resize(user.shots.size());
    std::iota(user.shot_indices.begin(), user.shot_indices.end(), 0);
    user.test_indices.resize(user.test.size());
    std::iota(user.test_indices.begin(), user.test_indices.end(), cfg.shots);
    return user;
}

PretrainResult pretrain(const TrainConfig& cfg, const std::vector<GazeSample>& source) {
    if (source.empty()) throw ContractError("pretrain on an empty source set");
    Rng rng = Rng::derive(cfg.seed, kStreamPretrain);
    PretrainResult result;
    result.net = init_minigaze(rng);

    AdamHyper h;
    h.lr = cfg.lr;
    h.beta1 = cfg.beta1;
    h.beta2 = cfg.beta2;
    h.eps = cfg.eps;
    h.weight_decay = 0.0;
    NetAdamStates states;

    MiniGazeNet& net = result.net;
    result.curve.push_back({0, dataset_l1(resolve_params(net), source)});

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (const std::vector<int>& batch : make_batches(source.size(), cfg.batch_size, rng)) {
            const NetParams p = resolve_params(net);
            NetGrads grads = zero_grads_like(p);
            const double batch_loss = batch_l1_backward(p, source, batch, grads);
            epoch_loss += batch_loss * static_cast<double>(batch.size());
            for (int i = 0; i < kNetConvs; ++i) {
                adamw_step(net.conv[i], grads.conv[i], states.conv[i], h);
                adamw_step(net.aff[i].scale, grads.aff[i].scale, states.aff_scale[i], h);
                adamw_step(net.aff[i].bias, grads.aff[i].bias, states.aff_bias[i], h);
            }
            adamw_step(net.head_w, grads.head_w, states.head_w, h);
            adamw_step(net.head_b, grads.head_b, states.head_b, h);
        }
        // Mean training loss over the epoch's batches (weights move within
        // the epoch; entry 0 is the exact pre-training loss).
        result.curve.push_back({epoch, epoch_loss / static_cast<double>(source.size())});
    }
    return result;
}

double mean_angular_error(const DecomposedGazeNet& net, const AdapterSet* adapters, ForwardMode mode,
                          const std::vector<GazeSample>& samples) {
    if (samples.empty()) throw ContractError("mean_angular_error over an empty set");
    double total = 0.0;
    if (mode == ForwardMode::merged) {
        static const AdapterSet kNone;
        const MergedGazeNet merged = merge_adapters(net, adapters ? *adapters : kNone);
        for (const GazeSample& s : samples) {
            const Gaze2 out = forward(merged, s.image);
            total += angular_error({s.yaw, s.pitch}, {out.yaw, out.pitch});
        }
    } else {
        const NetParams p = resolve_params(net, mode == ForwardMode::adapted ? adapters : nullptr);
        for (const GazeSample& s : samples) {
            const Gaze2 out = net_forward(p, s.image);
            total += angular_error({s.yaw, s.pitch}, {out.yaw, out.pitch});
        }
    }
    return total / static_cast<double>(samples.size());
}

RecoveryResult truncate_and_recover(const MiniGazeNet& net, int d, const TrainConfig& cfg,
                                    const std::vector<GazeSample>& source) {
    if (source.empty()) throw ContractError("truncate_and_recover on an empty source set");
    RecoveryResult result;
    result.net = decompose_net(net, d, &result.clamp_warnings);
    result.source_error_before_deg = mean_angular_error(result.net, nullptr, ForwardMode::base, source);

    Rng rng = Rng::derive(cfg.seed, kStreamPretrain + 1);
    AdamHyper h;
    h.lr = cfg.recover_lr;
    h.beta1 = cfg.beta1;
    h.beta2 = cfg.beta2;
    h.eps = cfg.eps;
    h.weight_decay = 0.0;

    DecomposedGazeNet& dnet = result.net;
    std::array<AdamState, kNetConvs> st_u, st_v;
    NetAdamStates states;

    result.curve.push_back({0, dataset_l1(resolve_params(dnet, nullptr), source)});
    for (int epoch = 1; epoch <= cfg.recover_epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (const std::vector<int>& batch : make_batches(source.size(), cfg.batch_size, rng)) {
            const NetParams p = resolve_params(dnet, nullptr);
            NetGrads grads = zero_grads_like(p);
            const double batch_loss = batch_l1_backward(p, source, batch, grads);
            epoch_loss += batch_loss * static_cast<double>(batch.size());
            for (int i = 0; i < kNetConvs; ++i) {
                // W = U * Vbase: route the weight gradient to both factors.
                const Matrix du = matmul(grads.conv[i], transpose(dnet.conv[i].Vbase));
                const Matrix dv = matmul(transpose(dnet.conv[i].U), grads.conv[i]);
                adamw_step(dnet.conv[i].U, du, st_u[i], h);
                adamw_step(dnet.conv[i].Vbase, dv, st_v[i], h);
                adamw_step(dnet.aff[i].scale, grads.aff[i].scale, states.aff_scale[i], h);
                adamw_step(dnet.aff[i].bias, grads.aff[i].bias, states.aff_bias[i], h);
            }
            adamw_step(dnet.head_w, grads.head_w, states.head_w, h);
            adamw_step(dnet.head_b, grads.head_b, states.head_b, h);
        }
        result.curve.push_back({epoch, epoch_loss / static_cast<double>(source.size())});
    }
    result.source_error_after_deg = mean_angular_error(dnet, nullptr, ForwardMode::base, source);
    return result;
}

PersonalizeResult personalize(const DecomposedGazeNet& net, const std::vector<Matrix>& shots,
                              const TrainConfig& cfg, std::uint64_t stream) {
    if (shots.empty()) throw ContractError("personalize with zero shots");
    PersonalizeResult result;
    const AdapterKind kind = adapter_kind_from(cfg.adapter);
    result.adapters.kind = kind;

    Rng rng = Rng::derive(cfg.seed, kStreamPersonalize + stream);

    // Training images: each shot plus one augmented repeat.
    std::vector<Matrix> images;
    for (const Matrix& shot : shots) {
        images.push_back(shot);
        if (cfg.augment) {
            AugmentParams ap;
            ap.brightness_jitter = cfg.brightness_jitter;
            ap.noise_sigma = cfg.noise_sigma;
            ap.translate_px = cfg.translate_px;
            images.push_back(augment_image(shot, ap, rng));
        }
    }

    const auto eval_sym_loss = [&](const AdapterSet& adapters) {
        const NetParams p = resolve_params(net, &adapters);
        std::vector<std::pair<std::pair<double, double>, std::pair<double, double>>> preds;
        preds.reserve(images.size());
        for (const Matrix& img : images) {
            const Gaze2 g = net_forward(p, img);
            const Gaze2 gf = net_forward(p, flip_image(img));
            preds.push_back({{g.yaw, g.pitch}, {gf.yaw, gf.pitch}});
        }
        return symmetry_loss(preds);
    };

    if (kind == AdapterKind::none) {
        result.loss_trace.push_back(eval_sym_loss(result.adapters));
        return result;
    }

    // Fresh identity-at-init adapters on the adapted layer set.
    std::vector<int> adapted;
    for (int i = cfg.adapt_conv1 ? 0 : 1; i < kNetConvs; ++i) adapted.push_back(i);
    for (int i : adapted) {
        const DecomposedLayer& base = net.conv[static_cast<size_t>(i)];
        const double sigma = 1.0 / std::sqrt(static_cast<double>(base.d));
        if (kind == AdapterKind::alfa) {
            result.adapters.alfa[static_cast<size_t>(i)] =
                init_alfa(base.d, base.n, cfg.heads, cfg.adapter_rank, sigma, rng);
        } else {
            result.adapters.lora[static_cast<size_t>(i)] =
                init_lora(base.m, base.n, cfg.adapter_rank, sigma, rng);
        }
    }

    struct AlfaStates {
        std::vector<AdamState> a_q, b_q;
        AdamState a_p, b_p;
    };
    std::array<AlfaStates, kNetConvs> alfa_states;
    std::array<AdamState, kNetConvs> lora_a_states, lora_b_states;
    for (int i : adapted) {
        if (kind == AdapterKind::alfa) {
            alfa_states[static_cast<size_t>(i)].a_q.resize(static_cast<size_t>(cfg.heads));
            alfa_states[static_cast<size_t>(i)].b_q.resize(static_cast<size_t>(cfg.heads));
        }
    }

    const double inv_n = 1.0 / static_cast<double>(images.size());
    for (int step = 0; step < cfg.personalize_steps; ++step) {
        const NetParams p = resolve_params(net, &result.adapters);
        NetGrads grads = zero_grads_like(p);
        double loss = 0.0;
        ForwardCache cache, cache_f;
        for (const Matrix& img : images) {
            const Gaze2 g = net_forward(p, img, &cache);
            const Gaze2 gf = net_forward(p, flip_image(img), &cache_f);
            // Flip-consistency residual: (yaw + yaw_flip, pitch - pitch_flip).
            const double ry = g.yaw + gf.yaw;
            const double rp = g.pitch - gf.pitch;
            loss += std::abs(ry) + std::abs(rp);
            const double sy = sign_of(ry) * inv_n;
            const double sp = sign_of(rp) * inv_n;
            net_backward(p, cache, {sy, sp}, grads);
            net_backward(p, cache_f, {sy, -sp}, grads);
        }
        result.loss_trace.push_back(loss * inv_n);

        for (int i : adapted) {
            const DecomposedLayer& base = net.conv[static_cast<size_t>(i)];
            AdamHyper h;
            h.lr = cfg.personalize_lr * (i == kNetConvs - 1 ? cfg.lr_multiplier_late : 1.0);
            h.beta1 = cfg.beta1;
            h.beta2 = cfg.beta2;
            h.eps = cfg.eps;
            h.weight_decay = cfg.weight_decay;
            if (kind == AdapterKind::alfa) {
                AlfaAdapter& ad = *result.adapters.alfa[static_cast<size_t>(i)];
                const Matrix dv = matmul(transpose(base.U), grads.conv[static_cast<size_t>(i)]);
                AlfaGraph graph = build_alfa_graph(ad, base);
                const AlfaGrads ag = alfa_grads_from(graph.tape.backward_from(graph.delta, dv), ad);
                AlfaStates& st = alfa_states[static_cast<size_t>(i)];
                for (int head = 0; head < ad.H; ++head) {
                    adamw_step(ad.A_Q[static_cast<size_t>(head)], ag.A_Q[static_cast<size_t>(head)],
                               st.a_q[static_cast<size_t>(head)], h);
                    adamw_step(ad.B_Q[static_cast<size_t>(head)], ag.B_Q[static_cast<size_t>(head)],
                               st.b_q[static_cast<size_t>(head)], h);
                }
                adamw_step(ad.A_P, ag.A_P, st.a_p, h);
                adamw_step(ad.B_P, ag.B_P, st.b_p, h);
            } else {
                LoraAdapter& ad = *result.adapters.lora[static_cast<size_t>(i)];
                const Matrix da = matmul(grads.conv[static_cast<size_t>(i)], transpose(ad.B));
                const Matrix db = matmul(transpose(ad.A), grads.conv[static_cast<size_t>(i)]);
                adamw_step(ad.A, da, lora_a_states[static_cast<size_t>(i)], h);
                adamw_step(ad.B, db, lora_b_states[static_cast<size_t>(i)], h);
            }
        }
    }
    result.loss_trace.push_back(eval_sym_loss(result.adapters));
    return result;
}

BenchmarkReport run_benchmark(const TrainConfig& cfg, int n_users) {
    if (n_users < 1) throw ContractError("run_benchmark needs at least one user");
    const auto t0 = std::chrono::steady_clock::now();

    BenchmarkReport report;
    report.seed = cfg.seed;

    const std::vector<GazeSample> source = make_source_population(cfg);
    const PretrainResult pre = pretrain(cfg, source);
    const RecoveryResult rec = truncate_and_recover(pre.net, cfg.svd_rank, cfg, source);
    report.notes = rec.clamp_warnings;

    const std::vector<std::string> methods = split_csv_list(cfg.benchmark_methods);

    struct Accum {
        double pre = 0.0;
        double post = 0.0;
        std::int64_t tuned = 0;
    };
    std::vector<Accum> accum(methods.size());

    for (int u = 0; u < n_users; ++u) {
        const EvalUser user = make_eval_user(cfg, u);
        const double pre_err = mean_angular_error(rec.net, nullptr, ForwardMode::base, user.test);

        std::vector<Matrix> shot_images;
        shot_images.reserve(user.shots.size());
        for (const GazeSample& s : user.shots) shot_images.push_back(s.image);

        for (size_t mi = 0; mi < methods.size(); ++mi) {
            TrainConfig run_cfg = cfg;
            run_cfg.adapter = methods[mi];
            const std::uint64_t stream = static_cast<std::uint64_t>(u) * 64 + mi;
            const PersonalizeResult pr = personalize(rec.net, shot_images, run_cfg, stream);

            UserRow row;
            row.user_id = u;
            row.method = methods[mi];
            row.pre_deg = pre_err;
            row.post_deg = pr.adapters.empty()
                               ? pre_err
                               : mean_angular_error(rec.net, &pr.adapters, ForwardMode::adapted, user.test);
            row.sym_initial = pr.loss_trace.front();
            row.sym_final = pr.loss_trace.back();
            report.rows.push_back(row);

            accum[mi].pre += row.pre_deg;
            accum[mi].post += row.post_deg;
            std::int64_t tuned = 0;
            for (int i = 0; i < kNetConvs; ++i) {
                if (pr.adapters.alfa[static_cast<size_t>(i)]) {
                    tuned += pr.adapters.alfa[static_cast<size_t>(i)]->param_count();
                }
                if (pr.adapters.lora[static_cast<size_t>(i)]) {
                    const LoraAdapter& ad = *pr.adapters.lora[static_cast<size_t>(i)];
                    tuned += static_cast<std::int64_t>(ad.A.size()) + static_cast<std::int64_t>(ad.B.size());
                }
            }
            accum[mi].tuned = tuned;
        }
    }

    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [](const UserRow& a, const UserRow& b) { return a.user_id < b.user_id; });

    std::int64_t max_tuned = 0;
    for (size_t mi = 0; mi < methods.size(); ++mi) {
        MethodSummary s;
        s.method = methods[mi];
        s.mean_pre = accum[mi].pre / n_users;
        s.mean_post = accum[mi].post / n_users;
        s.tuned_params = accum[mi].tuned;
        max_tuned = std::max(max_tuned, s.tuned_params);
        report.methods.push_back(std::move(s));
    }
    report.test_params = truncated_size(minigaze_inventory(), cfg.svd_rank);
    report.train_params = report.test_params + max_tuned;

    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

} // namespace alfa
