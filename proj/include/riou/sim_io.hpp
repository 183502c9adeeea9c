#pragma once

#include "riou/regsim.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace riou::sim {

/// Reads a flat `key = value` config. Keys are exactly the SimConfig field
/// names; omitted keys keep their defaults, unknown or repeated keys are
/// errors. `#` starts a comment. The distribution is written as
/// `iou_distribution = 0.1:0.4, 0.2:0.25, ...` (lower:weight pairs).
/// Throws ConfigError.
SimConfig parse_config(std::istream& in);
SimConfig load_config(const std::filesystem::path& path);

/// Inverse of parse_config.
std::string format_config(const SimConfig& cfg);

/// `bin_lower,bin_upper,initial_count,final_count,initial_grad_share`
std::string histograms_csv(const SimReport& report);

/// `key,value` rows: config echo followed by the measured scalars.
std::string scalars_csv(const SimReport& report);

std::string summary_text(const SimReport& report);

}  // namespace riou::sim
