#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "waterline/mask.hpp"

namespace waterline {

enum class Discipline { kCanoe, kKayak };

std::string_view to_string(Discipline d);
Discipline parse_discipline(std::string_view text);

struct Detection {
  Mask mask;
  Discipline cls = Discipline::kCanoe;
  double confidence = 0.0;  // (0, 1]
};

/// Upstream segmentation output for one image.
struct DetectionSet {
  std::string image_id;
  std::vector<Detection> detections;
};

struct GroundTruthMask {
  std::string image_id;
  Mask mask;
  Discipline cls = Discipline::kCanoe;
};

/// Highest-confidence detection; the earliest one wins ties.
/// Throws kNoDetection on an empty set.
const Detection& select_instance(const DetectionSet& set);

/// |a & b| / |a | b|, 1.0 when both are empty. Throws kDimensionMismatch.
double iou(const Mask& a, const Mask& b);

/// F1 with `cls` as the positive label; 0 when 2TP + FP + FN == 0.
double f1_per_class(std::span<const Discipline> preds, std::span<const Discipline> truths,
                    Discipline cls);

// --- index files -----------------------------------------------------------

struct DetectionRef {
  Discipline cls = Discipline::kCanoe;
  double confidence = 0.0;
  std::filesystem::path mask_file;
};

/// One line of the detection index (mask paths resolved against the index
/// file's directory).
struct DetectionIndexEntry {
  std::string image_id;
  std::filesystem::path image_file;
  std::vector<DetectionRef> detections;
};

struct GroundTruthIndexEntry {
  std::string image_id;
  Discipline cls = Discipline::kCanoe;
  std::filesystem::path mask_file;
};

std::vector<DetectionIndexEntry> load_detection_index(const std::filesystem::path& path);
std::vector<GroundTruthIndexEntry> load_groundtruth_index(const std::filesystem::path& path);

/// Reads every referenced mask and checks they share one size.
DetectionSet load_detection_set(const DetectionIndexEntry& entry);
GroundTruthMask load_groundtruth(const GroundTruthIndexEntry& entry);

}  // namespace waterline
