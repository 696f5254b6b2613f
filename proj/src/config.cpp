#include "alfa/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "alfa/errors.hpp"
#include "alfa/imageio.hpp"

namespace alfa {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Field {
    std::string key;
    std::function<void(TrainConfig&, const std::string&)> set;
    std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    std::from_chars_result res{};
    if constexpr (std::is_floating_point_v<T>) {
        res = std::from_chars(first, last, out, std::chars_format::general);
    } else {
        res = std::from_chars(first, last, out);
    }
    if (res.ec != std::errc{} || res.ptr != last) {
        throw ConfigError("key '" + key + "' has a malformed value '" + value + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("key '" + key + "' must be true or false, got '" + value + "'");
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        const auto num = [&f](const std::string& key, auto member) {
            using T = std::decay_t<decltype(std::declval<TrainConfig>().*member)>;
            f.push_back({key,
                         [key, member](TrainConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
                         [member](const TrainConfig& c) {
                             if constexpr (std::is_floating_point_v<T>) {
                                 return format_double(c.*member);
                             } else {
                                 return std::to_string(c.*member);
                             }
                         }});
        };
        const auto str = [&f](const std::string& key, auto member) {
            f.push_back({key, [member](TrainConfig& c, const std::string& v) { c.*member = v; },
                         [member](const TrainConfig& c) { return c.*member; }});
        };
        const auto flag = [&f](const std::string& key, auto member) {
            f.push_back({key,
                         [key, member](TrainConfig& c, const std::string& v) { c.*member = parse_bool(key, v); },
                         [member](const TrainConfig& c) { return (c.*member) ? "true" : "false"; }});
        };

        num("seed", &TrainConfig::seed);
        str("scenario", &TrainConfig::scenario);
        num("source_users", &TrainConfig::source_users);
        num("samples_per_user", &TrainConfig::samples_per_user);
        num("epochs", &TrainConfig::epochs);
        num("batch_size", &TrainConfig::batch_size);
        num("lr", &TrainConfig::lr);
        num("svd_rank", &TrainConfig::svd_rank);
        num("recover_epochs", &TrainConfig::recover_epochs);
        num("recover_lr", &TrainConfig::recover_lr);
        str("adapter", &TrainConfig::adapter);
        num("heads", &TrainConfig::heads);
        num("adapter_rank", &TrainConfig::adapter_rank);
        num("shots", &TrainConfig::shots);
        num("personalize_steps", &TrainConfig::personalize_steps);
        num("personalize_lr", &TrainConfig::personalize_lr);
        num("lr_multiplier_late", &TrainConfig::lr_multiplier_late);
        flag("adapt_conv1", &TrainConfig::adapt_conv1);
        flag("update_affine", &TrainConfig::update_affine);
        num("beta1", &TrainConfig::beta1);
        num("beta2", &TrainConfig::beta2);
        num("eps", &TrainConfig::eps);
        num("weight_decay", &TrainConfig::weight_decay);
        flag("augment", &TrainConfig::augment);
        num("brightness_jitter", &TrainConfig::brightness_jitter);
        num("noise_sigma", &TrainConfig::noise_sigma);
        num("translate_px", &TrainConfig::translate_px);
        num("eval_users", &TrainConfig::eval_users);
        num("eval_samples", &TrainConfig::eval_samples);
        num("shift_margin", &TrainConfig::shift_margin);
        num("pose_correlation", &TrainConfig::pose_correlation);
        str("benchmark_methods", &TrainConfig::benchmark_methods);
        return f;
    }();
    return table;
}

} // namespace

TrainConfig parse_config_text(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + " is not key=value: '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool found = false;
        for (const Field& f : fields()) {
            if (f.key == key) {
                f.set(cfg, value);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError("unknown key '" + key + "'");
    }
    validate(cfg);
    return cfg;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

std::string emit_config(const TrainConfig& cfg) {
    std::string out;
    for (const Field& f : fields()) {
        out += f.key;
        out += '=';
        out += f.get(cfg);
        out += '\n';
    }
    return out;
}

bool config_equal(const TrainConfig& a, const TrainConfig& b) {
    for (const Field& f : fields()) {
        if (f.get(a) != f.get(b)) return false;
    }
    return true;
}

} // namespace alfa
