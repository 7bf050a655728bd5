#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "waterline/geometry.hpp"
#include "waterline/mask.hpp"

namespace waterline {

/// Upward cut into the hull bottom, standing in for a wave or splash.
struct WaveNotch {
  int x_start = 0;
  int x_width = 0;
  int depth_px = 0;

  bool operator==(const WaveNotch&) const = default;
};

struct SynthSpec {
  int width = 1024;
  int height = 576;
  Line true_line;
  int hull_height = 60;
  int x0 = 200;
  int x1 = 824;
  std::vector<WaveNotch> notches;
  std::uint64_t seed = 0;
  std::optional<double> center_x;  // defaults to floor(width / 2)

  double resolved_center_x() const;
  void validate() const;
  bool operator==(const SynthSpec&) const = default;
};

struct SynthSample {
  SynthSpec spec;
  Mask mask;
  WaterlineParams truth;
};

/// Column x of [x0, x1] is foreground from round(line(x)) - hull_height down
/// to round(line(x)), minus the deepest notch covering it. Throws
/// kInvalidArgument when the hull leaves the image.
SynthSample generate(const SynthSpec& spec);

/// Ranges sampled by generate_batch; collapse a range (lo == hi) to fix it.
struct SynthBounds {
  int width = 1024;
  int height = 576;
  double slope_min = -0.03;
  double slope_max = 0.03;
  double h_min = 260.0;  // waterline height at the reference column
  double h_max = 380.0;
  int hull_height_min = 40;
  int hull_height_max = 90;
  // Near-frame-filling hulls: with integer envelopes and no sub-pixel
  // refinement, hulls much shorter than ~850 columns quantize alpha by more
  // than 0.1 degrees at some slopes.
  int x0_min = 20;
  int x0_max = 60;
  int x1_min = 963;
  int x1_max = 1003;
  int max_notches = 3;
  double max_notch_coverage = 0.2;  // share of hull columns
  int notch_width_min = 6;
  int notch_width_max = 40;
  int notch_depth_min = 3;
  int notch_depth_max = 10;
};

std::vector<SynthSample> generate_batch(std::size_t n, const SynthBounds& bounds,
                                        std::uint64_t seed);

/// Share of hull columns touched by at least one notch.
double notch_coverage(const SynthSpec& spec);

}  // namespace waterline
