#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace waterline {

/// Binary raster of one instance, row-major, 1 = foreground.
class Mask {
 public:
  Mask() = default;
  /// All-background mask; width and height must be positive.
  Mask(int width, int height);
  Mask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool value) { bits_[index(x, y)] = value ? 1 : 0; }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }

  bool operator==(const Mask&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Pixel {
  int x = 0;
  int y = 0;
  auto operator<=>(const Pixel&) const = default;
};

using PointSet = std::vector<Pixel>;

}  // namespace waterline
