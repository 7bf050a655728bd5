#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waterline/geometry.hpp"
#include "waterline/segmentation.hpp"

namespace waterline {

/// One expert's waterline for one study item.
struct AnnotationRecord {
  std::string image_id;
  std::string expert_id;
  WaterlineParams params;
  StudyGroup group = StudyGroup::kA;
  bool modified = false;
  std::int64_t timestamp = 0;  // seconds since epoch

  bool operator==(const AnnotationRecord&) const = default;
};

/// Consensus line of one image: per-parameter mean over its annotators.
struct GroundTruthLine {
  std::string image_id;
  double h = 0.0;
  double alpha = 0.0;
  double center_x = 0.0;
  std::size_t n_experts = 0;
};

struct DeviationRow {
  std::string image_id;
  std::string expert_id;
  double eps_h = 0.0;      // signed, px
  double eps_alpha = 0.0;  // signed, degrees
};

using DeviationTable = std::vector<DeviationRow>;

/// Output order follows the first appearance of each image_id. Throws
/// kMixedCenterX when one image's records disagree on center_x and
/// kInvalidArgument on a repeated (image_id, expert_id) pair.
std::vector<GroundTruthLine> aggregate_ground_truth(std::span<const AnnotationRecord> records);

/// Signed deviations from the consensus. Throws kMissingGroundTruth.
DeviationTable deviations(std::span<const AnnotationRecord> records,
                          std::span<const GroundTruthLine> ground_truth);

struct KruskalWallisResult {
  double h = 0.0;
  double p = 1.0;
  std::size_t df = 0;
};

/// Rank test with mid-ranks and tie correction; p from the chi-square
/// survival function with (groups - 1) degrees of freedom. All-equal input
/// yields H = 0, p = 1.
KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

enum class Parameter { kHeight, kAngle };

/// One group per expert (sorted by expert_id) pooling that expert's
/// deviations across all images.
std::vector<std::vector<double>> expert_groups(const DeviationTable& table, Parameter which);

struct PooledSigma {
  double sigma_h = 0.0;
  double sigma_alpha = 0.0;
};

/// RMS of the signed deviations about zero, denominator N. Needs >= 2 rows.
PooledSigma pooled_sigma(const DeviationTable& table);

struct AcceptanceRange {
  double sigma_h = 0.0;
  double sigma_alpha = 0.0;
  double u = 0.0;
  double delta_h = 0.0;
  double delta_alpha = 0.0;
  double coverage_target = 0.95;
  bool joint = true;
};

/// Builds a range from known sigmas and u, enforcing delta = u * sigma.
AcceptanceRange make_acceptance_range(double sigma_h, double sigma_alpha, double u,
                                      double coverage_target, bool joint = true);

struct CalibrationOptions {
  double grid_step = 0.1;
  /// Joint: a row counts only if both parameters are inside. Per-parameter:
  /// each parameter reaches the coverage on its own, u is the larger one.
  bool joint = true;
};

/// The grid point k * step, rounded so that decimal steps give exact values.
double grid_value(std::int64_t k, double step);

/// Fraction of rows contained at the given u.
double coverage_at(const DeviationTable& table, double sigma_h, double sigma_alpha, double u,
                   std::optional<Parameter> only = std::nullopt);

/// Smallest u on the grid reaching the coverage target.
AcceptanceRange calibrate_u(const DeviationTable& table, double sigma_h, double sigma_alpha,
                            double coverage, const CalibrationOptions& options = {});

struct AcceptanceResult {
  bool accepted = false;
  double eps_h = 0.0;
  double eps_alpha = 0.0;
  bool h_ok = false;
  bool alpha_ok = false;
};

/// Absolute errors against the consensus; throws kInvalidArgument when the
/// reference columns differ.
AcceptanceResult acceptance_check(const WaterlineParams& pred, const GroundTruthLine& gt,
                                  const AcceptanceRange& range);

/// Predicted waterline of one image, as emitted by detection.
struct PredictionRecord {
  std::string image_id;
  WaterlineParams params;
  std::optional<Discipline> cls;
  double confidence = 0.0;
};

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Linear interpolation between closest ranks; throws on empty input.
double quantile(std::vector<double> values, double q);
Quartiles quartiles(std::span<const double> values);

struct ErrorSummary {
  std::size_t count = 0;
  Quartiles eps_h;
  Quartiles eps_alpha;
};

struct ImageAcceptance {
  std::string image_id;
  AcceptanceResult result;
};

struct StudyReport {
  std::size_t n_images = 0;
  double h_rate = 0.0;
  double alpha_rate = 0.0;
  double joint_rate = 0.0;
  /// Keys "all", "canoe", "kayak" (disciplines only when present).
  std::map<std::string, ErrorSummary> errors;
  std::vector<ImageAcceptance> per_image;
};

/// Every prediction must match exactly one consensus image and vice versa.
StudyReport study_report(std::span<const AnnotationRecord> records,
                         std::span<const PredictionRecord> predictions,
                         const AcceptanceRange& range);

// --- serialization ---------------------------------------------------------

nlohmann::json params_to_json(const WaterlineParams& params);
nlohmann::json to_json(const AnnotationRecord& record);
AnnotationRecord annotation_from_json(const nlohmann::json& j, const std::string& where);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> records);

nlohmann::json to_json(const PredictionRecord& record);
/// Error records (those carrying an "error" field) are skipped.
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

nlohmann::json to_json(const AcceptanceRange& range);
nlohmann::json to_json(const KruskalWallisResult& kw);
nlohmann::json to_json(const StudyReport& report);

}  // namespace waterline
