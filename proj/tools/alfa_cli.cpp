// Command-line front end: training, personalization, evaluation, merging,
// parameter accounting and inspection over ATF1 weight files.
//
// Exit codes: 0 success, 2 config error, 3 unwritable output, 4 corrupt
// ATF1 file, 5 shape inconsistency between files, 6 slice/head index out of
// range.

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alfa/atf.hpp"
#include "alfa/config.hpp"
#include "alfa/errors.hpp"
#include "alfa/imageio.hpp"
#include "alfa/model.hpp"
#include "alfa/ttp.hpp"

namespace {

using namespace alfa;

std::string format_count(std::int64_t v) {
    std::string digits = std::to_string(v);
    std::string out;
    int run = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (run && run % 3 == 0) out.push_back(',');
        out.push_back(*it);
        ++run;
    }
    return std::string(out.rbegin(), out.rend());
}

std::string format_millions(std::int64_t v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), static_cast<double>(v) / 1e6,
                                   std::chars_format::fixed, 2);
    return std::string(buf, res.ptr) + " M";
}

std::string count_line(const std::string& label, std::int64_t v) {
    return label + ": " + format_count(v) + " (" + format_millions(v) + ")\n";
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

TrainConfig load_config_with_env(const std::string& path) {
    TrainConfig cfg = load_config(path);
    if (const char* seed = std::getenv("ALFA_SEED")) {
        std::uint64_t v = 0;
        const auto res = std::from_chars(seed, seed + std::strlen(seed), v);
        if (res.ec != std::errc{} || *res.ptr != '\0') {
            throw ConfigError("ALFA_SEED is not an integer: '" + std::string(seed) + "'");
        }
        cfg.seed = v;
    }
    return cfg;
}

std::string out_dir_with_env(const std::string& flag_value) {
    if (const char* dir = std::getenv("ALFA_OUT")) return dir;
    return flag_value;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct PretrainArgs {
    std::string config, out;
    std::int64_t seed = -1;
};

int cmd_pretrain(const PretrainArgs& args) {
    TrainConfig cfg = load_config_with_env(args.config);
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    const std::string dir = out_dir_with_env(args.out);
    ensure_dir(dir);

    const std::vector<GazeSample> source = make_source_population(cfg);
    const PretrainResult pre = pretrain(cfg, source);
    const RecoveryResult rec = truncate_and_recover(pre.net, cfg.svd_rank, cfg, source);

    save_raw_net(dir + "/model_raw.atf", pre.net);
    save_decomposed_net(dir + "/model_decomposed.atf", rec.net);

    std::string curve = csv_line({"epoch", "l1_loss"});
    for (const EpochLoss& e : pre.curve) curve += csv_line({std::to_string(e.epoch), format_double(e.loss)});
    write_text_atomic(dir + "/pretrain_loss.csv", curve);

    std::string recover = csv_line({"epoch", "l1_loss"});
    for (const EpochLoss& e : rec.curve) recover += csv_line({std::to_string(e.epoch), format_double(e.loss)});
    write_text_atomic(dir + "/recover_loss.csv", recover);

    for (const std::string& w : rec.clamp_warnings) std::cout << "warning: " << w << "\n";
    std::cout << "pretrain final l1: " << format_double(pre.curve.back().loss) << "\n";
    std::cout << "source error post-truncation: " << format_double(rec.source_error_before_deg) << " deg\n";
    std::cout << "source error after recovery:  " << format_double(rec.source_error_after_deg) << " deg\n";
    std::cout << "wrote " << dir << "/model_raw.atf, model_decomposed.atf, pretrain_loss.csv, recover_loss.csv\n";
    return 0;
}

struct PersonalizeArgs {
    std::string config, weights, out;
    int user = 0;
};

int cmd_personalize(const PersonalizeArgs& args) {
    const TrainConfig cfg = load_config_with_env(args.config);
    const std::string dir = out_dir_with_env(args.out);
    ensure_dir(dir);
    const DecomposedGazeNet net = load_net(args.weights).as_decomposed();

    const EvalUser user = make_eval_user(cfg, args.user);
    std::vector<Matrix> shots;
    for (const GazeSample& s : user.shots) shots.push_back(s.image);
    const PersonalizeResult pr = personalize(net, shots, cfg, static_cast<std::uint64_t>(args.user));

    if (!pr.adapters.empty()) save_adapters(dir + "/adapter.atf", pr.adapters);
    std::string trace = csv_line({"step", "symmetry_loss"});
    for (size_t i = 0; i < pr.loss_trace.size(); ++i) {
        trace += csv_line({std::to_string(i), format_double(pr.loss_trace[i])});
    }
    write_text_atomic(dir + "/sym_loss.csv", trace);
    std::cout << "symmetry loss " << format_double(pr.loss_trace.front()) << " -> "
              << format_double(pr.loss_trace.back()) << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string config, weights, adapter, out;
};

int cmd_evaluate(const EvaluateArgs& args) {
    const TrainConfig cfg = load_config_with_env(args.config);
    const std::string dir = out_dir_with_env(args.out);
    ensure_dir(dir);
    const LoadedNet loaded = load_net(args.weights);

    AdapterSet adapters;
    const bool with_adapter = !args.adapter.empty();
    if (with_adapter) adapters = load_adapters(args.adapter);

    std::string csv = csv_line({"user_id", "n_samples", "mean_error_deg"});
    for (int u = 0; u < cfg.eval_users; ++u) {
        const EvalUser user = make_eval_user(cfg, u);
        double err = 0.0;
        if (with_adapter) {
            const DecomposedGazeNet net = loaded.as_decomposed();
            err = mean_angular_error(net, &adapters, ForwardMode::adapted, user.test);
        } else {
            const NetParams p = loaded.resolve();
            double total = 0.0;
            for (const GazeSample& s : user.test) {
                const Gaze2 g = net_forward(p, s.image);
                total += angular_error({s.yaw, s.pitch}, {g.yaw, g.pitch});
            }
            err = total / static_cast<double>(user.test.size());
        }
        csv += csv_line({std::to_string(u), std::to_string(user.test.size()), format_double(err)});
    }
    write_text_atomic(dir + "/eval.csv", csv);
    std::cout << "wrote " << dir << "/eval.csv\n";
    return 0;
}

struct MergeArgs {
    std::string weights, adapter, out;
};

int cmd_merge(const MergeArgs& args) {
    const DecomposedGazeNet net = load_net(args.weights).as_decomposed();
    const AdapterSet adapters = load_adapters(args.adapter);
    const MergedGazeNet merged = merge_adapters(net, adapters);
    if (const auto parent = std::filesystem::path(args.out).parent_path(); !parent.empty()) {
        ensure_dir(parent.string());
    }
    save_merged_net(args.out, merged);
    std::cout << "wrote " << args.out << "\n";
    return 0;
}

struct CountParamsArgs {
    std::string arch = "resnet18";
    std::string method = "alfa";
    int svd_rank = 64;
    int heads = 0; // 0: no adapter accounting
    int lora_rank = 8;
    int layers = -1; // -1: default adapted set (all decomposed convs but the stem)
};

int cmd_count_params(const CountParamsArgs& args) {
    ModelInventory inv;
    if (args.arch == "resnet18") {
        inv = resnet18_inventory();
    } else if (args.arch == "minigaze") {
        inv = minigaze_inventory();
    } else {
        throw ConfigError("unknown arch '" + args.arch + "' (resnet18 or minigaze)");
    }
    if (args.method != "alfa" && args.method != "lora") {
        throw ConfigError("method must be alfa or lora, got '" + args.method + "'");
    }

    const std::vector<std::pair<int, int>> all_convs = conv_shapes(inv, true);
    const int default_layers = static_cast<int>(all_convs.size()) - 1;
    const int layers = args.layers < 0 ? default_layers : args.layers;

    const std::int64_t full = inv.total_params();
    const std::int64_t test = truncated_size(inv, args.svd_rank);

    std::string out;
    out += "arch: " + inv.arch + "\n";
    out += count_line("full", full);
    out += count_line("test", test);

    const bool want_adapter = args.method == "lora" || args.heads > 0;
    if (want_adapter) {
        std::int64_t tuned = 0;
        if (args.method == "alfa") {
            if (args.heads < 1) throw ConfigError("--heads must be >= 1 for alfa accounting");
            tuned = alfa_param_count(args.heads, args.lora_rank, args.svd_rank, layers);
        } else {
            std::vector<std::pair<int, int>> shapes;
            if (layers == static_cast<int>(all_convs.size())) {
                shapes = all_convs;
            } else if (layers == default_layers) {
                shapes = conv_shapes(inv, false);
            } else {
                throw ConfigError("--layers for lora accounting must be " + std::to_string(default_layers) +
                                  " or " + std::to_string(all_convs.size()) + " for " + inv.arch);
            }
            tuned = lora_param_count(args.lora_rank, shapes);
        }
        out += count_line("tuned", tuned);
        // The plain low-rank delta cannot fold into truncated factors, so it
        // ships with the deployed model; the attentive one merges away.
        const std::int64_t train = test + tuned;
        out += count_line("train", train);
        out += count_line("deploy", args.method == "lora" ? train : test);
    }

    int noncompressive = 0;
    for (const TruncatedLayerSize& t : truncated_layer_sizes(inv, args.svd_rank)) {
        if (t.d_eff > 0 && !t.compressive) ++noncompressive;
    }
    out += "non-compressive layers at this rank: " + std::to_string(noncompressive) + "\n";
    std::cout << out;
    return 0;
}

struct BenchmarkArgs {
    std::string config, out;
    int users = -1;
};

int cmd_benchmark(const BenchmarkArgs& args) {
    const TrainConfig cfg = load_config_with_env(args.config);
    const std::string dir = out_dir_with_env(args.out);
    ensure_dir(dir);

    const int users = args.users > 0 ? args.users : cfg.eval_users;
    const BenchmarkReport report = run_benchmark(cfg, users);

    std::string csv = csv_line(
        {"user_id", "method", "pre_error_deg", "post_error_deg", "sym_loss_initial", "sym_loss_final"});
    for (const UserRow& r : report.rows) {
        csv += csv_line({std::to_string(r.user_id), r.method, format_double(r.pre_deg),
                         format_double(r.post_deg), format_double(r.sym_initial), format_double(r.sym_final)});
    }
    write_text_atomic(dir + "/report.csv", csv);

    std::string summary;
    summary += "seed: " + std::to_string(report.seed) + "\n";
    summary += "users: " + std::to_string(users) + "\n";
    summary += count_line("test params", report.test_params);
    summary += count_line("train params", report.train_params);
    for (const MethodSummary& m : report.methods) {
        summary += m.method + ": mean pre " + format_double(m.mean_pre) + " deg, mean post " +
                   format_double(m.mean_post) + " deg, tuned params " + format_count(m.tuned_params) + "\n";
    }
    for (const std::string& note : report.notes) summary += "note: " + note + "\n";
    summary += "wall clock: " + format_double(report.wall_seconds) + " s\n";
    write_text_atomic(dir + "/summary.txt", summary);

    std::cout << summary;
    std::cout << "wrote " << dir << "/report.csv and summary.txt\n";
    return 0;
}

struct ExportArgs {
    std::string config, out;
    std::string profile = "shifted";
    int user = 0;
    int count = 8;
};

int cmd_export_samples(const ExportArgs& args) {
    const TrainConfig cfg = load_config_with_env(args.config);
    const std::string dir = out_dir_with_env(args.out);
    ensure_dir(dir);

    std::vector<GazeSample> samples;
    if (args.profile == "source") {
        samples = source_samples_for(cfg, args.user, args.count);
    } else if (args.profile == "shifted") {
        const EvalUser user = make_eval_user(cfg, args.user);
        samples = user.shots;
        for (const GazeSample& s : user.test) {
            if (static_cast<int>(samples.size()) >= args.count) break;
            samples.push_back(s);
        }
        if (static_cast<int>(samples.size()) > args.count) samples.resize(static_cast<size_t>(args.count));
    } else {
        throw ConfigError("profile must be source or shifted, got '" + args.profile + "'");
    }

    std::string labels = csv_line({"user_id", "index", "yaw", "pitch"});
    for (size_t i = 0; i < samples.size(); ++i) {
        const GazeSample& s = samples[i];
        const std::string name = "user" + std::to_string(args.user) + "_" + std::to_string(i) + ".pgm";
        write_pgm(dir + "/" + name, s.image);
        labels += csv_line({std::to_string(s.user_id), std::to_string(i), format_double(s.yaw),
                            format_double(s.pitch)});
    }
    write_text_atomic(dir + "/labels.csv", labels);
    std::cout << "wrote " << samples.size() << " images and labels.csv to " << dir << "\n";
    return 0;
}

int layer_index_from(const std::string& name) {
    for (int i = 0; i < kNetConvs; ++i) {
        if (name == "conv" + std::to_string(i + 1)) return i;
    }
    throw ConfigError("unknown layer '" + name + "' (conv1..conv" + std::to_string(kNetConvs) + ")");
}

struct InspectSliceArgs {
    std::string weights, layer, image, out;
    int slice = 0;
};

int cmd_inspect_slice(const InspectSliceArgs& args) {
    const LoadedNet loaded = load_net(args.weights);
    const int layer = layer_index_from(args.layer);
    if (!loaded.factors[static_cast<size_t>(layer)]) {
        throw ShapeError("layer '" + args.layer + "' is not stored in factor form");
    }
    const DecomposedLayer& fact = *loaded.factors[static_cast<size_t>(layer)];
    const Matrix slice_w = rank_slice(fact, args.slice); // throws IndexError when out of range

    const Matrix image = read_pgm(args.image);
    const std::string dir = out_dir_with_env(args.out);
    ensure_dir(dir);

    // Swap the rank-1 slice in as this layer's weight and read its raw conv
    // response; all output channels are proportional, so their mean is the
    // natural single map.
    NetParams probe = loaded.resolve();
    probe.conv[layer] = slice_w;
    ForwardCache cache;
    net_forward(probe, image, &cache);
    const Tensor3& response = cache.conv_out[layer];

    Matrix map(response.h, response.w);
    for (int c = 0; c < response.ch; ++c) {
        const double* plane = response.plane(c);
        for (int i = 0; i < response.h * response.w; ++i) map.data[static_cast<size_t>(i)] += plane[i];
    }
    map = scale(map, 1.0 / response.ch);

    const std::string stem = dir + "/slice_" + args.layer + "_" + std::to_string(args.slice);
    write_pgm_normalized(stem + ".pgm", map);
    write_matrix_csv(stem + ".csv", map);
    std::cout << "wrote " << stem << ".pgm and .csv\n";
    return 0;
}

struct InspectHeadsArgs {
    std::string weights, adapter, layer;
    int head = -1;
    int topk = 4;
};

int cmd_inspect_heads(const InspectHeadsArgs& args) {
    const DecomposedGazeNet net = load_net(args.weights).as_decomposed();
    const AdapterSet adapters = load_adapters(args.adapter);
    if (adapters.kind != AdapterKind::alfa) {
        throw ConfigError("inspect-heads needs an attentive adapter file");
    }

    for (int i = 0; i < kNetConvs; ++i) {
        if (!adapters.alfa[static_cast<size_t>(i)]) continue;
        const std::string name = "conv" + std::to_string(i + 1);
        if (!args.layer.empty() && name != args.layer) continue;
        const AlfaAdapter& ad = *adapters.alfa[static_cast<size_t>(i)];
        const DecomposedLayer& base = net.conv[static_cast<size_t>(i)];
        if (args.head >= ad.H) {
            throw IndexError("head " + std::to_string(args.head) + " out of range [0, " +
                             std::to_string(ad.H) + ")");
        }
        const int h_lo = args.head >= 0 ? args.head : 0;
        const int h_hi = args.head >= 0 ? args.head + 1 : ad.H;
        for (int h = h_lo; h < h_hi; ++h) {
            const std::vector<int> top = head_topk(ad, base, h, args.topk);
            const Matrix attn = alfa_attention(ad, base, h);
            std::cout << name << " head " << h << ":";
            for (int idx : top) {
                double mass = 0.0;
                for (int row = 0; row < attn.rows; ++row) mass += attn(row, idx);
                std::cout << " slice " << idx << " (mass " << format_double(mass) << ")";
            }
            std::cout << "\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"structured low-rank adaptation lab for desk-scale gaze personalization"};
    app.require_subcommand(1);

    PretrainArgs pretrain_args;
    auto* sc_pretrain = app.add_subcommand("pretrain", "train, truncate and recover a source model");
    sc_pretrain->add_option("--config", pretrain_args.config, "config file")->required();
    sc_pretrain->add_option("--out", pretrain_args.out, "output directory")->required();
    sc_pretrain->add_option("--seed", pretrain_args.seed, "override config seed");

    PersonalizeArgs personalize_args;
    auto* sc_personalize = app.add_subcommand("personalize", "fit adapters to one user's unlabeled shots");
    sc_personalize->add_option("--config", personalize_args.config)->required();
    sc_personalize->add_option("--weights", personalize_args.weights, "decomposed model ATF1")->required();
    sc_personalize->add_option("--user", personalize_args.user, "evaluation-user index");
    sc_personalize->add_option("--out", personalize_args.out)->required();

    EvaluateArgs evaluate_args;
    auto* sc_evaluate = app.add_subcommand("evaluate", "per-user angular error on held-out samples");
    sc_evaluate->add_option("--config", evaluate_args.config)->required();
    sc_evaluate->add_option("--weights", evaluate_args.weights)->required();
    sc_evaluate->add_option("--adapter", evaluate_args.adapter);
    sc_evaluate->add_option("--out", evaluate_args.out)->required();

    MergeArgs merge_args;
    auto* sc_merge = app.add_subcommand("merge", "fold adapters into stored weights");
    sc_merge->add_option("--weights", merge_args.weights)->required();
    sc_merge->add_option("--adapter", merge_args.adapter)->required();
    sc_merge->add_option("--out", merge_args.out, "output ATF1 path")->required();

    CountParamsArgs count_args;
    auto* sc_count = app.add_subcommand("count-params", "parameter accounting for an architecture");
    sc_count->add_option("--arch", count_args.arch, "resnet18 or minigaze");
    sc_count->add_option("--svd-rank", count_args.svd_rank);
    sc_count->add_option("--heads", count_args.heads);
    sc_count->add_option("--lora-rank", count_args.lora_rank);
    sc_count->add_option("--layers", count_args.layers, "adapted layer count");
    sc_count->add_option("--method", count_args.method, "alfa or lora");

    BenchmarkArgs benchmark_args;
    auto* sc_benchmark = app.add_subcommand("benchmark", "end-to-end personalization benchmark");
    sc_benchmark->add_option("--config", benchmark_args.config)->required();
    sc_benchmark->add_option("--out", benchmark_args.out)->required();
    sc_benchmark->add_option("--users", benchmark_args.users, "override eval_users");

    ExportArgs export_args;
    auto* sc_export = app.add_subcommand("export-samples", "write synthetic samples as PGM + labels CSV");
    sc_export->add_option("--config", export_args.config)->required();
    sc_export->add_option("--out", export_args.out)->required();
    sc_export->add_option("--profile", export_args.profile, "source or shifted");
    sc_export->add_option("--user", export_args.user);
    sc_export->add_option("--count", export_args.count);

    InspectSliceArgs slice_args;
    auto* sc_slice = app.add_subcommand("inspect-slice", "activation map of one basis slice");
    sc_slice->add_option("--weights", slice_args.weights)->required();
    sc_slice->add_option("--layer", slice_args.layer)->required();
    sc_slice->add_option("--slice", slice_args.slice)->required();
    sc_slice->add_option("--image", slice_args.image, "input PGM")->required();
    sc_slice->add_option("--out", slice_args.out)->required();

    InspectHeadsArgs heads_args;
    auto* sc_heads = app.add_subcommand("inspect-heads", "top attended slices per head");
    sc_heads->add_option("--weights", heads_args.weights)->required();
    sc_heads->add_option("--adapter", heads_args.adapter)->required();
    sc_heads->add_option("--layer", heads_args.layer);
    sc_heads->add_option("--head", heads_args.head);
    sc_heads->add_option("--topk", heads_args.topk);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (sc_pretrain->parsed()) return cmd_pretrain(pretrain_args);
        if (sc_personalize->parsed()) return cmd_personalize(personalize_args);
        if (sc_evaluate->parsed()) return cmd_evaluate(evaluate_args);
        if (sc_merge->parsed()) return cmd_merge(merge_args);
        if (sc_count->parsed()) return cmd_count_params(count_args);
        if (sc_benchmark->parsed()) return cmd_benchmark(benchmark_args);
        if (sc_export->parsed()) return cmd_export_samples(export_args);
        if (sc_slice->parsed()) return cmd_inspect_slice(slice_args);
        if (sc_heads->parsed()) return cmd_inspect_heads(heads_args);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const AtfError& e) {
        std::cerr << e.what() << "\n";
        return 4;
    } catch (const IndexError& e) {
        std::cerr << e.what() << "\n";
        return 6;
    } catch (const ShapeError& e) {
        std::cerr << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
