#include "waterline/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "waterline/error.hpp"
#include "waterline/random.hpp"

namespace waterline {

namespace {

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

int notch_depth_at(const SynthSpec& spec, int x) {
  int depth = 0;
  for (const auto& n : spec.notches) {
    if (x >= n.x_start && x < n.x_start + n.x_width) depth = std::max(depth, n.depth_px);
  }
  return depth;
}

}  // namespace

double SynthSpec::resolved_center_x() const {
  return center_x ? *center_x : std::floor(static_cast<double>(width) / 2.0);
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidArgument, m); };
  if (width <= 0 || height <= 0) fail("synthetic image dimensions must be positive");
  if (!(x0 < x1)) fail("hull range needs x0 < x1");
  if (x0 < 0 || x1 >= width) fail("hull columns leave the image");
  if (hull_height < 0) fail("hull_height must be >= 0");
  if (!std::isfinite(true_line.slope) || !std::isfinite(true_line.intercept)) {
    fail("true line must be finite");
  }
  for (const auto& n : notches) {
    if (n.depth_px < 0) fail("notch depth must be >= 0");
    if (n.x_width < 0) fail("notch width must be >= 0");
  }
  // A straight line is monotone, so the end columns bound every column.
  for (int x : {x0, x1}) {
    const int bottom = round_half_up(true_line(x));
    if (bottom - hull_height < 0 || bottom >= height) {
      fail("hull rows leave the image at column " + std::to_string(x));
    }
  }
}

SynthSample generate(const SynthSpec& spec) {
  spec.validate();
  Mask mask(spec.width, spec.height);
  for (int x = spec.x0; x <= spec.x1; ++x) {
    const int bottom = round_half_up(spec.true_line(x));
    const int top = bottom - spec.hull_height;
    const int cut = bottom - notch_depth_at(spec, x);
    for (int y = top; y <= cut; ++y) mask.set(x, y, true);
  }
  return {spec, std::move(mask), line_to_params(spec.true_line, spec.resolved_center_x())};
}

double notch_coverage(const SynthSpec& spec) {
  int covered = 0;
  for (int x = spec.x0; x <= spec.x1; ++x) covered += notch_depth_at(spec, x) > 0;
  return static_cast<double>(covered) / static_cast<double>(spec.x1 - spec.x0 + 1);
}

std::vector<SynthSample> generate_batch(std::size_t n, const SynthBounds& b, std::uint64_t seed) {
  std::vector<SynthSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t item_seed = mix_seed(seed, i);
    std::mt19937_64 rng(item_seed);
    SynthSpec s;
    s.width = b.width;
    s.height = b.height;
    s.seed = item_seed;
    const double slope = uniform_real(rng, b.slope_min, b.slope_max);
    const double h = uniform_real(rng, b.h_min, b.h_max);
    const double cx = s.resolved_center_x();
    s.true_line = {slope, h - slope * cx};
    s.hull_height = static_cast<int>(uniform_int(rng, b.hull_height_min, b.hull_height_max));
    s.x0 = static_cast<int>(uniform_int(rng, b.x0_min, b.x0_max));
    s.x1 = static_cast<int>(uniform_int(rng, b.x1_min, b.x1_max));

    const int columns = s.x1 - s.x0 + 1;
    const int budget = static_cast<int>(std::floor(b.max_notch_coverage * columns));
    const int count = static_cast<int>(uniform_int(rng, 0, b.max_notches));
    int used = 0;
    for (int k = 0; k < count; ++k) {
      const int width_hi = std::min(b.notch_width_max, budget - used);
      if (width_hi < b.notch_width_min || width_hi <= 0) break;
      WaveNotch notch;
      notch.x_width = static_cast<int>(uniform_int(rng, b.notch_width_min, width_hi));
      notch.x_start = static_cast<int>(uniform_int(rng, s.x0, s.x1 - notch.x_width + 1));
      notch.depth_px = static_cast<int>(uniform_int(rng, b.notch_depth_min, b.notch_depth_max));
      used += notch.x_width;
      s.notches.push_back(notch);
    }
    out.push_back(generate(s));
  }
  return out;
}

}  // namespace waterline
