#include "waterline/segmentation.hpp"

#include <set>

#include "waterline/error.hpp"
#include "waterline/mask_io.hpp"
#include "waterline/ndjson.hpp"

namespace waterline {

std::string_view to_string(Discipline d) {
  return d == Discipline::kCanoe ? "canoe" : "kayak";
}

Discipline parse_discipline(std::string_view text) {
  if (text == "canoe") return Discipline::kCanoe;
  if (text == "kayak") return Discipline::kKayak;
  throw Error(ErrorCode::kSchemaViolation,
              "class must be \"canoe\" or \"kayak\", got '" + std::string(text) + "'");
}

const Detection& select_instance(const DetectionSet& set) {
  if (set.detections.empty()) {
    throw Error(ErrorCode::kNoDetection, "no detections for image '" + set.image_id + "'");
  }
  const Detection* best = &set.detections.front();
  for (const Detection& d : set.detections) {
    if (d.confidence > best->confidence) best = &d;
  }
  return *best;
}

double iou(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "IoU of " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                    " and " + std::to_string(b.width()) + "x" + std::to_string(b.height()) +
                    " masks");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  const auto& ab = a.bits();
  const auto& bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += ab[i] & bb[i];
    uni += ab[i] | bb[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double f1_per_class(std::span<const Discipline> preds, std::span<const Discipline> truths,
                    Discipline cls) {
  if (preds.size() != truths.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "F1 over " + std::to_string(preds.size()) + " predictions and " +
                    std::to_string(truths.size()) + " labels");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == cls;
    const bool t = truths[i] == cls;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& file) {
  std::filesystem::path p(file);
  return p.is_absolute() ? p : base / p;
}

std::string location(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

std::vector<DetectionIndexEntry> load_detection_index(const std::filesystem::path& path) {
  const auto base = path.parent_path();
  std::vector<DetectionIndexEntry> entries;
  std::set<std::string> seen;
  for (const auto& rec : read_ndjson(path)) {
    const std::string where = location(path, rec.line);
    FieldReader r(rec.value, where);
    DetectionIndexEntry e;
    e.image_id = r.string("image_id");
    e.image_file = resolve(base, r.string("image_file"));
    if (!seen.insert(e.image_id).second) r.fail("duplicate image_id '" + e.image_id + "'");
    for (const auto& d : r.array("detections")) {
      FieldReader dr(d, where + " detection");
      DetectionRef ref;
      ref.cls = parse_discipline(dr.string("class"));
      ref.confidence = dr.number("confidence");
      if (!(ref.confidence > 0.0 && ref.confidence <= 1.0)) {
        dr.fail("confidence must lie in (0, 1]");
      }
      ref.mask_file = resolve(base, dr.string("mask_file"));
      e.detections.push_back(std::move(ref));
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<GroundTruthIndexEntry> load_groundtruth_index(const std::filesystem::path& path) {
  const auto base = path.parent_path();
  std::vector<GroundTruthIndexEntry> entries;
  std::set<std::string> seen;
  for (const auto& rec : read_ndjson(path)) {
    FieldReader r(rec.value, location(path, rec.line));
    GroundTruthIndexEntry e;
    e.image_id = r.string("image_id");
    if (!seen.insert(e.image_id).second) r.fail("duplicate image_id '" + e.image_id + "'");
    e.cls = parse_discipline(r.string("class"));
    e.mask_file = resolve(base, r.string("mask_file"));
    entries.push_back(std::move(e));
  }
  return entries;
}

DetectionSet load_detection_set(const DetectionIndexEntry& entry) {
  DetectionSet set{entry.image_id, {}};
  for (const auto& ref : entry.detections) {
    Mask mask = read_mask(ref.mask_file);
    if (!set.detections.empty()) {
      const Mask& first = set.detections.front().mask;
      if (first.width() != mask.width() || first.height() != mask.height()) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "detections of image '" + entry.image_id + "' differ in size");
      }
    }
    set.detections.push_back({std::move(mask), ref.cls, ref.confidence});
  }
  return set;
}

GroundTruthMask load_groundtruth(const GroundTruthIndexEntry& entry) {
  GroundTruthMask gt{entry.image_id, read_mask(entry.mask_file), entry.cls};
  if (gt.mask.empty()) {
    throw Error(ErrorCode::kNoForeground,
                "ground-truth mask of '" + entry.image_id + "' is empty");
  }
  return gt;
}

}  // namespace waterline
