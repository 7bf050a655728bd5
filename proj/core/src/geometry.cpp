#include "waterline/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "waterline/error.hpp"

namespace waterline {

namespace {
constexpr double kDegPerRad = 180.0 / std::numbers::pi;
}  // namespace

std::string_view to_string(StudyGroup group) {
  switch (group) {
    case StudyGroup::kA: return "A";
    case StudyGroup::kB: return "B";
    case StudyGroup::kC: return "C";
    case StudyGroup::kD: return "D";
  }
  return "?";
}

StudyGroup parse_study_group(std::string_view text) {
  if (text == "A") return StudyGroup::kA;
  if (text == "B") return StudyGroup::kB;
  if (text == "C") return StudyGroup::kC;
  if (text == "D") return StudyGroup::kD;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown study group '" + std::string(text) + "'");
}

WaterlineParams line_to_params(const Line& line, double center_x) {
  if (!std::isfinite(center_x)) {
    throw Error(ErrorCode::kInvalidArgument, "center_x must be finite");
  }
  return {line(center_x), std::atan(-line.slope) * kDegPerRad, center_x};
}

Line params_to_line(const WaterlineParams& params) {
  if (!(std::abs(params.alpha) < 90.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "alpha must lie strictly inside (-90, 90) degrees");
  }
  const double slope = -std::tan(params.alpha / kDegPerRad);
  return {slope, params.h - slope * params.center_x};
}

Perturbation perturbation_for(StudyGroup group) {
  switch (group) {
    case StudyGroup::kA: return {0.0, 0.0};
    case StudyGroup::kB: return {-3.0, 0.0};
    case StudyGroup::kC: return {2.0, -1.5};
    case StudyGroup::kD: return {2.0, 1.5};
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown study group");
}

WaterlineParams perturb(const WaterlineParams& params, StudyGroup group) {
  const Perturbation p = perturbation_for(group);
  return {params.h + p.dh, params.alpha + p.dalpha, params.center_x};
}

Line line_through(double x0, double y0, double x1, double y1) {
  if (x0 == x1) {
    throw Error(ErrorCode::kInvalidArgument, "anchors share the same column");
  }
  const double slope = (y1 - y0) / (x1 - x0);
  return {slope, y0 - slope * x0};
}

}  // namespace waterline
