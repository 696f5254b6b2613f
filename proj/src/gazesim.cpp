#include "alfa/gazesim.hpp"

#include <algorithm>
#include <cmath>

#include "alfa/errors.hpp"
#include "alfa/model.hpp"

namespace alfa {

namespace {

constexpr double kSocketSigma = 2.6;
constexpr double kSocketAmp = 0.65;
constexpr double kIrisAmp = 0.55;
constexpr double kLidSigmaV = 1.4;
constexpr double kLidOffset = 2.2; // rows above eye center
constexpr double kBaseLevel = 0.12;
constexpr double kGazeToPx = 4.5; // px of iris travel per radian

double blob(double dx2, double dy2, double sigma) {
    return std::exp(-(dx2 + dy2) / (2.0 * sigma * sigma));
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

double sample_in(const ScalarBounds& b, Rng& rng) { return rng.uniform(b.lo, b.hi); }

double sample_outside(const ScalarBounds& src, const ScalarBounds& hard, double margin, Rng& rng) {
    const double width = src.hi - src.lo;
    const double delta = rng.uniform(0.35, 1.0) * margin * width;
    const double v = rng.coin() ? src.hi + delta : src.lo - delta;
    return std::clamp(v, hard.lo, hard.hi);
}

} // namespace

const ProfileBounds& source_bounds() {
    static const ProfileBounds b{
        {9.0, 13.0},    // eye_spacing
        {13.0, 17.0},   // eye_height
        {1.2, 2.0},     // iris_radius
        {0.05, 0.30},   // eyelid_droop
        {0.85, 1.15},   // brightness
        {0.004, 0.012}, // noise_level
    };
    return b;
}

const ProfileBounds& hard_bounds() {
    static const ProfileBounds b{
        {6.0, 16.0}, {10.0, 20.0}, {0.8, 2.8}, {0.0, 0.8}, {0.3, 1.8}, {0.0, 0.05},
    };
    return b;
}

UserProfile sample_source_profile(int user_id, Rng& rng) {
    const ProfileBounds& s = source_bounds();
    UserProfile p;
    p.user_id = user_id;
    p.eye_spacing = sample_in(s.eye_spacing, rng);
    p.eye_height = sample_in(s.eye_height, rng);
    p.iris_radius = sample_in(s.iris_radius, rng);
    p.eyelid_droop = sample_in(s.eyelid_droop, rng);
    p.brightness = sample_in(s.brightness, rng);
    p.noise_level = sample_in(s.noise_level, rng);
    return p;
}

UserProfile sample_shifted_profile(int user_id, double margin, Rng& rng) {
    const ProfileBounds& s = source_bounds();
    const ProfileBounds& h = hard_bounds();
    UserProfile p;
    p.user_id = user_id;
    // Photometric and vertical-geometry scalars shift hardest; horizontal
    // geometry moves less, keeping the left/right gaze cue legible.
    p.eye_spacing = sample_outside(s.eye_spacing, h.eye_spacing, 0.4 * margin, rng);
    p.eye_height = sample_outside(s.eye_height, h.eye_height, margin, rng);
    p.iris_radius = sample_outside(s.iris_radius, h.iris_radius, 0.4 * margin, rng);
    p.eyelid_droop = sample_outside(s.eyelid_droop, h.eyelid_droop, margin, rng);
    p.brightness = sample_outside(s.brightness, h.brightness, margin, rng);
    p.noise_level = sample_in(s.noise_level, rng);
    return p;
}

Matrix render_clean(const UserProfile& profile, double yaw, double pitch) {
    Matrix img(kImageSize, kImageSize);
    const double half = profile.eye_spacing * 0.5;
    const double dx = kGazeToPx * yaw;   // exactly odd in yaw
    const double dy = kGazeToPx * pitch;
    const double center = (kImageSize - 1) * 0.5; // 15.5, exactly representable
    const double lid_row = profile.eye_height - kLidOffset;
    const double lid_sigma_u = kSocketSigma + 0.8;

    for (int i = 0; i < kImageSize; ++i) {
        const double v = static_cast<double>(i) - profile.eye_height;
        const double v2 = v * v;
        const double lv = static_cast<double>(i) - lid_row;
        const double lid_v = std::exp(-(lv * lv) / (2.0 * kLidSigmaV * kLidSigmaV));
        const double iv = v - dy;
        const double iv2 = iv * iv;
        for (int j = 0; j < kImageSize; ++j) {
            const double u = static_cast<double>(j) - center;
            const double ul = u + half; // left eye offset
            const double ur = u - half; // right eye offset
            const double sockets = blob(ul * ul, v2, kSocketSigma) + blob(ur * ur, v2, kSocketSigma);
            const double il = ul - dx;
            const double ir = ur - dx;
            const double irises =
                blob(il * il, iv2, profile.iris_radius) + blob(ir * ir, iv2, profile.iris_radius);
            const double lids = lid_v * (std::exp(-(ul * ul) / (2.0 * lid_sigma_u * lid_sigma_u)) +
                                         std::exp(-(ur * ur) / (2.0 * lid_sigma_u * lid_sigma_u)));
            const double value =
                kBaseLevel + kSocketAmp * sockets - kIrisAmp * irises - profile.eyelid_droop * lids;
            img(i, j) = clamp01(profile.brightness * value);
        }
    }
    return img;
}

GazeSample gen_sample(const UserProfile& profile, double yaw, double pitch, Rng& rng) {
    if (std::abs(yaw) > profile.yaw_max || std::abs(pitch) > profile.pitch_max) {
        throw RangeError("pose (" + std::to_string(yaw) + ", " + std::to_string(pitch) +
                         ") outside profile range");
    }
    GazeSample s;
    s.user_id = profile.user_id;
    s.yaw = yaw;
    s.pitch = pitch;
    s.image = render_clean(profile, yaw, pitch);
    if (profile.noise_level > 0.0) {
        for (double& px : s.image.data) {
            px = clamp01(px + rng.gaussian(0.0, profile.noise_level));
        }
    }
    return s;
}

std::vector<GazeSample> gen_user_samples(const UserProfile& profile, int count, Rng& rng, double yaw_limit,
                                         double pitch_limit, double pose_correlation) {
    const double ymax = yaw_limit >= 0.0 ? std::min(yaw_limit, profile.yaw_max) : profile.yaw_max;
    const double pmax = pitch_limit >= 0.0 ? std::min(pitch_limit, profile.pitch_max) : profile.pitch_max;
    const double rho = std::clamp(pose_correlation, -1.0, 1.0);
    const double mix = std::sqrt(1.0 - rho * rho);
    std::vector<GazeSample> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double yaw = rng.uniform(-ymax, ymax);
        double pitch = rho * (pmax / ymax) * yaw + mix * rng.uniform(-pmax, pmax);
        pitch = std::clamp(pitch, -pmax, pmax);
        out.push_back(gen_sample(profile, yaw, pitch, rng));
    }
    return out;
}

Matrix flip_image(const Matrix& image) {
    Matrix out(image.rows, image.cols);
    for (int i = 0; i < image.rows; ++i) {
        for (int j = 0; j < image.cols; ++j) {
            out(i, j) = image(i, image.cols - 1 - j);
        }
    }
    return out;
}

std::pair<double, double> flip_yaw(std::pair<double, double> gaze) {
    return {-gaze.first, gaze.second};
}

double symmetry_loss(const std::vector<std::pair<std::pair<double, double>, std::pair<double, double>>>& preds) {
    if (preds.empty()) throw ContractError("symmetry_loss over an empty batch");
    double total = 0.0;
    for (const auto& [g, g_flip] : preds) {
        const auto unflipped = flip_yaw(g_flip);
        total += std::abs(g.first - unflipped.first) + std::abs(g.second - unflipped.second);
    }
    return total / static_cast<double>(preds.size());
}

double angular_error(std::pair<double, double> g, std::pair<double, double> g_hat) {
    const auto to_vec = [](std::pair<double, double> yp) {
        const double y = yp.first, p = yp.second;
        return std::array<double, 3>{std::cos(p) * std::sin(y), std::sin(p), std::cos(p) * std::cos(y)};
    };
    const auto a = to_vec(g);
    const auto b = to_vec(g_hat);
    double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    dot = std::clamp(dot, -1.0, 1.0);
    return std::acos(dot) * (180.0 / 3.14159265358979323846);
}

Matrix augment_image(const Matrix& image, const AugmentParams& params, Rng& rng) {
    const int tx = params.translate_px > 0 ? rng.uniform_int(-params.translate_px, params.translate_px) : 0;
    const int ty = params.translate_px > 0 ? rng.uniform_int(-params.translate_px, params.translate_px) : 0;
    const double db = rng.uniform(-params.brightness_jitter, params.brightness_jitter);
    Matrix out(image.rows, image.cols);
    for (int i = 0; i < image.rows; ++i) {
        for (int j = 0; j < image.cols; ++j) {
            const int si = i - ty;
            const int sj = j - tx;
            double v = 0.0;
            if (si >= 0 && si < image.rows && sj >= 0 && sj < image.cols) {
                v = image(si, sj);
            }
            v += db;
            if (params.noise_sigma > 0.0) v += rng.gaussian(0.0, params.noise_sigma);
            out(i, j) = clamp01(v);
        }
    }
    return out;
}

} // namespace alfa
