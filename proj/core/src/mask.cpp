#include "waterline/mask.hpp"

#include <algorithm>
#include <string>

#include "waterline/error.hpp"

namespace waterline {

Mask::Mask(int width, int height)
    : Mask(width, height,
           std::vector<std::uint8_t>(
               width > 0 && height > 0
                   ? static_cast<std::size_t>(width) * static_cast<std::size_t>(height)
                   : 0,
               0)) {}

Mask::Mask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "mask dimensions must be positive, got " + std::to_string(width) +
                    "x" + std::to_string(height));
  }
  if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "mask raster holds " + std::to_string(bits_.size()) +
                    " values, expected " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

}  // namespace waterline
