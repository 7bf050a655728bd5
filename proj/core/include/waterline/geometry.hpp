#pragma once

#include <string_view>

namespace waterline {

/// y = slope * x + intercept in image coordinates (y grows downward).
struct Line {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double x) const { return slope * x + intercept; }
  bool operator==(const Line&) const = default;
};

/// Waterline expressed as its height at a reference column and its angle
/// to the horizontal. Positive alpha means the right end is visually higher.
struct WaterlineParams {
  double h = 0.0;        // px
  double alpha = 0.0;    // degrees, (-90, 90)
  double center_x = 0.0; // px

  bool operator==(const WaterlineParams&) const = default;
};

enum class StudyGroup { kA, kB, kC, kD };

std::string_view to_string(StudyGroup group);
StudyGroup parse_study_group(std::string_view text);

WaterlineParams line_to_params(const Line& line, double center_x);

/// Throws kInvalidArgument for |alpha| >= 90.
Line params_to_line(const WaterlineParams& params);

/// Offsets applied to the initial line shown for each study group.
struct Perturbation {
  double dh = 0.0;
  double dalpha = 0.0;
};

Perturbation perturbation_for(StudyGroup group);

/// Shifts h first, then rotates about (center_x, h + dh), so h is unaffected
/// by the rotation.
WaterlineParams perturb(const WaterlineParams& params, StudyGroup group);

/// Line through the two anchor points (x0 != x1 required).
Line line_through(double x0, double y0, double x1, double y1);

}  // namespace waterline
