#pragma once

#include <utility>
#include <vector>

#include "alfa/matrix.hpp"
#include "alfa/rng.hpp"

namespace alfa {

// Procedural eye-region renderer. Appearance scalars are per-user; gaze
// (yaw, pitch) moves the iris blobs inside fixed sockets. Every horizontal
// dependence goes through squared offsets, so the pre-noise render of
// (-yaw, pitch) is exactly the column-mirror of (yaw, pitch).
struct UserProfile {
    int user_id = 0;
    double eye_spacing = 11.0; // px between eye centers
    double eye_height = 15.0;  // row of eye centers
    double iris_radius = 1.6;
    double eyelid_droop = 0.15;
    double brightness = 1.0;
    double noise_level = 0.008;
    double yaw_max = 0.5;    // radians
    double pitch_max = 0.35; // radians
};

struct GazeSample {
    Matrix image; // 32x32, values in [0, 1]
    double yaw = 0.0;
    double pitch = 0.0;
    int user_id = 0;
};

// Sampling bounds for source users, and the hard validity bounds that
// shifted users may not leave.
struct ScalarBounds {
    double lo, hi;
};
struct ProfileBounds {
    ScalarBounds eye_spacing, eye_height, iris_radius, eyelid_droop, brightness, noise_level;
};
const ProfileBounds& source_bounds();
const ProfileBounds& hard_bounds();

UserProfile sample_source_profile(int user_id, Rng& rng);
// Appearance scalars pushed outside the source bounds by `margin` times the
// bound width (random side per scalar), clamped to the hard bounds.
UserProfile sample_shifted_profile(int user_id, double margin, Rng& rng);

// Noise-free render; the deterministic part of a sample.
Matrix render_clean(const UserProfile& profile, double yaw, double pitch);

// render_clean plus per-pixel Gaussian noise at the profile's noise level,
// clamped back to [0, 1]. Pose outside the profile range is an error.
GazeSample gen_sample(const UserProfile& profile, double yaw, double pitch, Rng& rng);

// Uniformly sampled poses, optionally restricted to a tighter box (used for
// frontal-only shot collection). `pose_correlation` couples pitch to yaw
// (pitch = rho * scaled yaw + sqrt(1 - rho^2) * uniform, clamped), modeling
// collection rigs whose gaze targets sweep diagonally; deployment-time
// sampling uses 0.
std::vector<GazeSample> gen_user_samples(const UserProfile& profile, int count, Rng& rng,
                                         double yaw_limit = -1.0, double pitch_limit = -1.0,
                                         double pose_correlation = 0.0);

Matrix flip_image(const Matrix& image);

std::pair<double, double> flip_yaw(std::pair<double, double> gaze);

// Mean L1 distance between predictions on originals and yaw-flipped
// predictions on mirrored inputs.
double symmetry_loss(const std::vector<std::pair<std::pair<double, double>, std::pair<double, double>>>& preds);

// Angle in degrees between two (yaw, pitch) directions after mapping to 3-D
// unit vectors v = (cos p sin y, sin p, cos p cos y).
double angular_error(std::pair<double, double> g, std::pair<double, double> g_hat);

struct AugmentParams {
    double brightness_jitter = 0.1;
    double noise_sigma = 0.02;
    int translate_px = 1;
};

// Seeded jitter: +-1 px translation, brightness offset, pixel noise.
Matrix augment_image(const Matrix& image, const AugmentParams& params, Rng& rng);

} // namespace alfa
