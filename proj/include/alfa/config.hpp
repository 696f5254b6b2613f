#pragma once

#include <string>

#include "alfa/ttp.hpp"

namespace alfa {

// Line-oriented key=value config. '#' starts a comment, blank lines are
// ignored, unknown keys are rejected. parse(emit(cfg)) == cfg.
TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config(const std::string& path);
std::string emit_config(const TrainConfig& cfg);

bool config_equal(const TrainConfig& a, const TrainConfig& b);

} // namespace alfa
