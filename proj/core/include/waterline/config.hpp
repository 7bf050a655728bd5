#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace waterline {

/// Run configuration shared by every command. Image geometry defaults follow
/// 1024x576 recordings; center_x falls back to floor(width / 2) per image.
struct Config {
  std::optional<double> center_x;
  double coverage_target = 0.95;
  double u_grid_step = 0.1;
  bool joint_calibration = true;
  std::uint64_t seed = 0;

  double resolve_center_x(int image_width) const;
  void validate() const;

  bool operator==(const Config&) const = default;
};

nlohmann::json to_json(const Config& config);
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::string& path);

/// Stable 16-hex-digit FNV-1a digest of the canonical JSON form.
std::string config_hash(const Config& config);

}  // namespace waterline
