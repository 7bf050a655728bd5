#include "waterline/mask_io.hpp"

#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "waterline/error.hpp"

namespace waterline {

RleMask encode_rle(const Mask& mask) {
  RleMask rle{mask.width(), mask.height(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (std::uint8_t bit : mask.bits()) {
    if (bit != current) {
      rle.runs.push_back(run);
      current = bit;
      run = 0;
    }
    ++run;
  }
  rle.runs.push_back(run);
  return rle;
}

Mask decode_rle(const RleMask& rle) {
  if (rle.width <= 0 || rle.height <= 0) {
    throw Error(ErrorCode::kSchemaViolation, "RLE mask dimensions must be positive");
  }
  const std::size_t total = static_cast<std::size_t>(rle.width) * static_cast<std::size_t>(rle.height);
  std::vector<std::uint8_t> bits;
  bits.reserve(total);
  std::uint8_t value = 0;
  for (std::uint32_t run : rle.runs) {
    if (bits.size() + run > total) {
      throw Error(ErrorCode::kSchemaViolation, "RLE runs exceed width*height");
    }
    bits.insert(bits.end(), run, value);
    value ^= 1;
  }
  if (bits.size() != total) {
    throw Error(ErrorCode::kSchemaViolation,
                "RLE runs cover " + std::to_string(bits.size()) + " pixels, expected " +
                    std::to_string(total));
  }
  return Mask(rle.width, rle.height, std::move(bits));
}

nlohmann::json to_json(const RleMask& rle) {
  return {{"width", rle.width}, {"height", rle.height}, {"rle", rle.runs}};
}

RleMask rle_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("width") || !j.contains("height") ||
      !j.contains("rle") || !j["rle"].is_array()) {
    throw Error(ErrorCode::kSchemaViolation,
                "RLE record needs integer width, height and an rle array");
  }
  try {
    RleMask rle;
    rle.width = j["width"].get<int>();
    rle.height = j["height"].get<int>();
    rle.runs = j["rle"].get<std::vector<std::uint32_t>>();
    return rle;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("RLE record: ") + e.what());
  }
}

Mask read_mask_raster(const std::filesystem::path& path) {
  const cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) {
    throw Error(ErrorCode::kIoError, "cannot read raster '" + path.string() + "'");
  }
  if (img.type() != CV_8UC1) {
    throw Error(ErrorCode::kSchemaViolation,
                "raster '" + path.string() + "' is not 8-bit single-channel");
  }
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(img.rows) * img.cols);
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.cols; ++x) {
      bits[static_cast<std::size_t>(y) * img.cols + x] = row[x] != 0 ? 1 : 0;
    }
  }
  return Mask(img.cols, img.rows, std::move(bits));
}

void write_mask_raster(const Mask& mask, const std::filesystem::path& path) {
  cv::Mat img(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    auto* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width(); ++x) row[x] = mask.at(x, y) ? 255 : 0;
  }
  if (!cv::imwrite(path.string(), img)) {
    throw Error(ErrorCode::kIoError, "cannot write raster '" + path.string() + "'");
  }
}

std::pair<int, int> raster_size(const std::filesystem::path& path) {
  const cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) {
    throw Error(ErrorCode::kIoError, "cannot read raster '" + path.string() + "'");
  }
  return {img.cols, img.rows};
}

Mask read_mask_rle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, "'" + path.string() + "': " + e.what());
  }
  return decode_rle(rle_from_json(j));
}

void write_mask_rle(const Mask& mask, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << to_json(encode_rle(mask)).dump() << '\n';
}

namespace {
bool is_rle_path(const std::filesystem::path& path) {
  const auto ext = path.extension();
  return ext == ".rle" || ext == ".json";
}
}  // namespace

Mask read_mask(const std::filesystem::path& path) {
  return is_rle_path(path) ? read_mask_rle(path) : read_mask_raster(path);
}

void write_mask(const Mask& mask, const std::filesystem::path& path) {
  if (is_rle_path(path)) {
    write_mask_rle(mask, path);
  } else {
    write_mask_raster(mask, path);
  }
}

}  // namespace waterline
