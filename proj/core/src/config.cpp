#include "waterline/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "waterline/error.hpp"

namespace waterline {

double Config::resolve_center_x(int image_width) const {
  if (center_x) return *center_x;
  return std::floor(static_cast<double>(image_width) / 2.0);
}

void Config::validate() const {
  if (center_x && (!std::isfinite(*center_x) || *center_x < 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "center_x must be finite and >= 0");
  }
  if (!(coverage_target > 0.0 && coverage_target < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "coverage_target must lie in (0, 1)");
  }
  if (!(u_grid_step > 0.0) || !std::isfinite(u_grid_step)) {
    throw Error(ErrorCode::kInvalidArgument, "u_grid_step must be positive");
  }
}

nlohmann::json to_json(const Config& config) {
  nlohmann::json j;
  j["center_x"] = config.center_x ? nlohmann::json(*config.center_x) : nlohmann::json();
  j["coverage_target"] = config.coverage_target;
  j["u_grid_step"] = config.u_grid_step;
  j["joint_calibration"] = config.joint_calibration;
  j["seed"] = config.seed;
  return j;
}

Config config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kSchemaViolation, "config must be a JSON object");
  }
  static const char* const kKnown[] = {"center_x", "coverage_target", "u_grid_step",
                                       "joint_calibration", "seed"};
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) {
      throw Error(ErrorCode::kSchemaViolation, "unknown config key '" + key + "'");
    }
  }
  Config c;
  try {
    if (j.contains("center_x") && !j["center_x"].is_null()) {
      c.center_x = j["center_x"].get<double>();
    }
    c.coverage_target = j.value("coverage_target", c.coverage_target);
    c.u_grid_step = j.value("u_grid_step", c.u_grid_step);
    c.joint_calibration = j.value("joint_calibration", c.joint_calibration);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, "config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const Config& config) {
  const std::string canonical = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace waterline
