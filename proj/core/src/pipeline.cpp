#include "waterline/pipeline.hpp"

#include <algorithm>
#include <map>

#include "waterline/error.hpp"

namespace waterline {

namespace {
// Points this close to the line count as on it.
constexpr double kOnLineTolerance = 1e-9;
}  // namespace

PointSet extract_contour(const Mask& mask) {
  PointSet contour;
  const int w = mask.width();
  const int h = mask.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      const bool on_border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
      if (on_border || !mask.at(x - 1, y) || !mask.at(x + 1, y) ||
          !mask.at(x, y - 1) || !mask.at(x, y + 1)) {
        contour.push_back({x, y});
      }
    }
  }
  if (contour.empty()) {
    throw Error(ErrorCode::kNoForeground, "mask has no foreground pixels");
  }
  return contour;
}

PointSet bottom_envelope(const PointSet& contour) {
  std::map<int, int> lowest;
  for (const Pixel& p : contour) {
    auto [it, inserted] = lowest.try_emplace(p.x, p.y);
    if (!inserted) it->second = std::max(it->second, p.y);
  }
  PointSet envelope;
  envelope.reserve(lowest.size());
  for (const auto& [x, y] : lowest) envelope.push_back({x, y});
  return envelope;
}

Line fit_line_ols(const PointSet& points) {
  if (points.empty()) {
    throw Error(ErrorCode::kDegenerateRegression, "regression over an empty point set");
  }
  const double n = static_cast<double>(points.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const Pixel& p : points) {
    mean_x += p.x;
    mean_y += p.y;
  }
  mean_x /= n;
  mean_y /= n;

  double sxx = 0.0;
  double sxy = 0.0;
  for (const Pixel& p : points) {
    const double dx = p.x - mean_x;
    sxx += dx * dx;
    sxy += dx * (p.y - mean_y);
  }
  // Integer abscissae: sxx is zero iff every point shares one column.
  if (sxx == 0.0) {
    throw Error(ErrorCode::kDegenerateRegression,
                "regression needs at least two distinct x values");
  }
  const double slope = sxy / sxx;
  return {slope, mean_y - slope * mean_x};
}

PointSet filter_above(const PointSet& points, const Line& line) {
  PointSet kept;
  kept.reserve(points.size());
  std::copy_if(points.begin(), points.end(), std::back_inserter(kept),
               [&](const Pixel& p) { return p.y >= line(p.x) - kOnLineTolerance; });
  return kept;
}

double residual_sum_of_squares(const PointSet& points, const Line& line) {
  double rss = 0.0;
  for (const Pixel& p : points) {
    const double r = p.y - line(p.x);
    rss += r * r;
  }
  return rss;
}

namespace {

bool has_two_columns(const PointSet& points) {
  if (points.empty()) return false;
  const int x0 = points.front().x;
  return std::any_of(points.begin(), points.end(),
                     [x0](const Pixel& p) { return p.x != x0; });
}

}  // namespace

WaterlineTrace trace_waterline(const Mask& mask, const Config& config) {
  WaterlineTrace t;
  t.contour = extract_contour(mask);
  t.envelope = bottom_envelope(t.contour);
  t.first_fit = fit_line_ols(t.envelope);
  t.kept = filter_above(t.envelope, t.first_fit);
  if (has_two_columns(t.kept)) {
    t.final_fit = fit_line_ols(t.kept);
  } else {
    t.final_fit = t.first_fit;
    t.fell_back = true;
  }
  t.params = line_to_params(t.final_fit, config.resolve_center_x(mask.width()));
  return t;
}

WaterlineParams detect_waterline(const Mask& mask, const Config& config) {
  return trace_waterline(mask, config).params;
}

}  // namespace waterline
