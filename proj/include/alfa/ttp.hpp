#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "alfa/gazesim.hpp"
#include "alfa/model.hpp"

namespace alfa {

// Full run configuration: pre-training on a synthetic source population,
// truncation with recovery fine-tuning, unlabeled per-user personalization
// and held-out evaluation. Defaults are desk-scale.
struct TrainConfig {
    std::uint64_t seed = 42;
    std::string scenario = "full-pose"; // full-pose | frontal-only

    int source_users = 40;
    int samples_per_user = 128;

    int epochs = 10;
    int batch_size = 64;
    double lr = 3e-3;

    int svd_rank = 4;
    int recover_epochs = 8;
    double recover_lr = 1e-3;

    std::string adapter = "alfa"; // none | lora | alfa
    int heads = 4;
    int adapter_rank = 2;
    int shots = 5;
    int personalize_steps = 50;
    double personalize_lr = 3e-5;
    double lr_multiplier_late = 10.0;
    bool adapt_conv1 = false;
    bool update_affine = false;

    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    bool augment = true;
    double brightness_jitter = 0.1;
    double noise_sigma = 0.02;
    int translate_px = 0;

    int eval_users = 10;
    int eval_samples = 200;
    double shift_margin = 0.9;
    double pose_correlation = 0.8; // source-collection yaw/pitch coupling

    std::string benchmark_methods = "none,lora,alfa";
};

// Throws ConfigError when a field is out of its documented range.
void validate(const TrainConfig& cfg);

AdapterKind adapter_kind_from(const std::string& name);

// Near-frontal pose box used by the frontal-only scenario (radians).
inline constexpr double kFrontalYawMax = 15.0 * 3.14159265358979323846 / 180.0;
inline constexpr double kFrontalPitchMax = 10.0 * 3.14159265358979323846 / 180.0;

struct EpochLoss {
    int epoch = 0;
    double loss = 0.0;
};

std::vector<GazeSample> make_source_population(const TrainConfig& cfg);

struct EvalUser {
    UserProfile profile;
    std::vector<GazeSample> shots;
    std::vector<GazeSample> test;
    std::vector<int> shot_indices; // positions in the user's draw stream
    std::vector<int> test_indices;
};

EvalUser make_eval_user(const TrainConfig& cfg, int user_id);

// Source-population views matching what make_source_population generates;
// used by the sample exporter.
UserProfile source_profile_for(const TrainConfig& cfg, int user_id);
std::vector<GazeSample> source_samples_for(const TrainConfig& cfg, int user_id, int count);

struct PretrainResult {
    MiniGazeNet net;
    std::vector<EpochLoss> curve; // epochs + 1 entries: initial loss, then one per epoch
};

// Supervised L1 regression on (yaw, pitch) with Adam (no weight decay).
PretrainResult pretrain(const TrainConfig& cfg, const std::vector<GazeSample>& source);

struct RecoveryResult {
    DecomposedGazeNet net;
    std::vector<std::string> clamp_warnings;
    double source_error_before_deg = 0.0; // right after truncation
    double source_error_after_deg = 0.0;  // after recovery fine-tuning
    std::vector<EpochLoss> curve;         // recover_epochs + 1 entries
};

// Decomposes every conv at rank d (clamped per layer, recorded), then
// fine-tunes factors, affines and head jointly on the source data.
RecoveryResult truncate_and_recover(const MiniGazeNet& net, int d, const TrainConfig& cfg,
                                    const std::vector<GazeSample>& source);

struct PersonalizeResult {
    AdapterSet adapters;
    std::vector<double> loss_trace; // personalize_steps + 1 entries (none: 1 entry)
};

// AdamW on adapter parameters only; the base stays frozen. The loss is the
// flip-consistency of predictions over the shot images (plus one augmented
// repeat each when augmentation is on).
PersonalizeResult personalize(const DecomposedGazeNet& net, const std::vector<Matrix>& shots,
                              const TrainConfig& cfg, std::uint64_t stream);

double mean_angular_error(const DecomposedGazeNet& net, const AdapterSet* adapters, ForwardMode mode,
                          const std::vector<GazeSample>& samples);

struct UserRow {
    int user_id = 0;
    std::string method;
    double pre_deg = 0.0;
    double post_deg = 0.0;
    double sym_initial = 0.0;
    double sym_final = 0.0;
};

struct MethodSummary {
    std::string method;
    double mean_pre = 0.0;
    double mean_post = 0.0;
    std::int64_t tuned_params = 0;
};

struct BenchmarkReport {
    std::vector<UserRow> rows; // sorted by user_id, then method order
    std::vector<MethodSummary> methods;
    std::int64_t test_params = 0;  // truncated model size
    std::int64_t train_params = 0; // test_params + largest tuned set
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    std::vector<std::string> notes;
};

// Pre-train once, then personalize and evaluate every configured method for
// each shifted synthetic user on a held-out per-user test set.
BenchmarkReport run_benchmark(const TrainConfig& cfg, int n_users);

} // namespace alfa
