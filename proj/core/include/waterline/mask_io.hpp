#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "waterline/mask.hpp"

namespace waterline {

/// Run lengths alternating background/foreground, always starting with a
/// background run (which may be zero). Runs sum to width * height.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> runs;

  bool operator==(const RleMask&) const = default;
};

RleMask encode_rle(const Mask& mask);
Mask decode_rle(const RleMask& rle);

nlohmann::json to_json(const RleMask& rle);
RleMask rle_from_json(const nlohmann::json& j);

/// 8-bit single-channel rasters (PNG, PGM, ...): nonzero is foreground.
Mask read_mask_raster(const std::filesystem::path& path);
/// Writes foreground as 255, background as 0.
void write_mask_raster(const Mask& mask, const std::filesystem::path& path);

/// Width and height of any raster OpenCV can decode (frames or masks).
std::pair<int, int> raster_size(const std::filesystem::path& path);

Mask read_mask_rle(const std::filesystem::path& path);
void write_mask_rle(const Mask& mask, const std::filesystem::path& path);

/// Dispatches on extension: ".rle" and ".json" are RLE records, anything
/// else is decoded as a raster.
Mask read_mask(const std::filesystem::path& path);
void write_mask(const Mask& mask, const std::filesystem::path& path);

}  // namespace waterline
