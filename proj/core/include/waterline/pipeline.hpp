#pragma once

#include "waterline/config.hpp"
#include "waterline/geometry.hpp"
#include "waterline/mask.hpp"

namespace waterline {

/// Foreground pixels with a background 4-neighbour or on the image border,
/// in row-major order. Throws kNoForeground for an empty mask.
PointSet extract_contour(const Mask& mask);

/// Lowest point (largest y) of every occupied column, sorted by x.
PointSet bottom_envelope(const PointSet& contour);

/// Ordinary least squares of y on x. Throws kDegenerateRegression when the
/// points span fewer than two distinct columns.
Line fit_line_ols(const PointSet& points);

/// Keeps points on or below the line in image terms, i.e. y >= line(x)
/// (within 1e-9, so points on the line survive rounding).
PointSet filter_above(const PointSet& points, const Line& line);

/// Sum of squared vertical residuals.
double residual_sum_of_squares(const PointSet& points, const Line& line);

/// Intermediate products of the two-stage regression, useful for debugging
/// and for asserting stage-level properties.
struct WaterlineTrace {
  PointSet contour;
  PointSet envelope;
  Line first_fit;
  PointSet kept;
  Line final_fit;
  bool fell_back = false;  // fewer than two columns survived filtering
  WaterlineParams params;
};

WaterlineTrace trace_waterline(const Mask& mask, const Config& config);

WaterlineParams detect_waterline(const Mask& mask, const Config& config);

}  // namespace waterline
