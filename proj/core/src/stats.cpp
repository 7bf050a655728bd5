#include "waterline/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include <boost/math/special_functions/gamma.hpp>

#include "waterline/error.hpp"
#include "waterline/ndjson.hpp"

namespace waterline {

std::vector<GroundTruthLine> aggregate_ground_truth(std::span<const AnnotationRecord> records) {
  std::vector<GroundTruthLine> lines;
  std::unordered_map<std::string, std::size_t> slot;
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& r : records) {
    if (!pairs.emplace(r.image_id, r.expert_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "expert '" + r.expert_id +
                                                   "' annotated image '" + r.image_id +
                                                   "' more than once");
    }
    auto [it, inserted] = slot.try_emplace(r.image_id, lines.size());
    if (inserted) {
      lines.push_back({r.image_id, 0.0, 0.0, r.params.center_x, 0});
    }
    GroundTruthLine& gt = lines[it->second];
    if (gt.center_x != r.params.center_x) {
      throw Error(ErrorCode::kMixedCenterX,
                  "image '" + r.image_id + "' mixes reference columns " +
                      std::to_string(gt.center_x) + " and " + std::to_string(r.params.center_x));
    }
    gt.h += r.params.h;
    gt.alpha += r.params.alpha;
    ++gt.n_experts;
  }
  for (auto& gt : lines) {
    gt.h /= static_cast<double>(gt.n_experts);
    gt.alpha /= static_cast<double>(gt.n_experts);
  }
  return lines;
}

DeviationTable deviations(std::span<const AnnotationRecord> records,
                          std::span<const GroundTruthLine> ground_truth) {
  std::unordered_map<std::string, const GroundTruthLine*> by_image;
  for (const auto& gt : ground_truth) by_image[gt.image_id] = &gt;
  DeviationTable table;
  table.reserve(records.size());
  for (const auto& r : records) {
    auto it = by_image.find(r.image_id);
    if (it == by_image.end()) {
      throw Error(ErrorCode::kMissingGroundTruth,
                  "no consensus line for image '" + r.image_id + "'");
    }
    table.push_back({r.image_id, r.expert_id, r.params.h - it->second->h,
                     r.params.alpha - it->second->alpha});
  }
  return table;
}

KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "Kruskal-Wallis needs at least two groups");
  }
  struct Obs {
    double value;
    std::size_t group;
  };
  std::vector<Obs> obs;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "Kruskal-Wallis group " + std::to_string(g) + " is empty");
    }
    for (double v : groups[g]) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidArgument, "Kruskal-Wallis values must be finite");
      }
      obs.push_back({v, g});
    }
  }
  const std::size_t n = obs.size();
  if (n < 3) {
    throw Error(ErrorCode::kInvalidArgument, "Kruskal-Wallis needs at least three values");
  }
  std::sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) { return a.value < b.value; });

  std::vector<double> rank_sum(groups.size(), 0.0);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && obs[j].value == obs[i].value) ++j;
    // Positions i..j-1 share the mid-rank of ranks i+1..j.
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank_sum[obs[k].group] += mid;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  const double nd = static_cast<double>(n);
  KruskalWallisResult res;
  res.df = groups.size() - 1;
  const double correction = 1.0 - tie_term / (nd * nd * nd - nd);
  if (correction <= 0.0) {
    res.h = 0.0;
    res.p = 1.0;
    return res;
  }
  double s = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    s += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
  }
  const double h = (12.0 / (nd * (nd + 1.0)) * s - 3.0 * (nd + 1.0)) / correction;
  res.h = std::max(h, 0.0);
  res.p = res.h == 0.0
              ? 1.0
              : boost::math::gamma_q(static_cast<double>(res.df) / 2.0, res.h / 2.0);
  return res;
}

std::vector<std::vector<double>> expert_groups(const DeviationTable& table, Parameter which) {
  std::map<std::string, std::vector<double>> by_expert;
  for (const auto& row : table) {
    by_expert[row.expert_id].push_back(which == Parameter::kHeight ? row.eps_h : row.eps_alpha);
  }
  std::vector<std::vector<double>> groups;
  groups.reserve(by_expert.size());
  for (auto& [_, values] : by_expert) groups.push_back(std::move(values));
  return groups;
}

PooledSigma pooled_sigma(const DeviationTable& table) {
  if (table.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "pooled sigma needs at least two deviations");
  }
  double ss_h = 0.0;
  double ss_a = 0.0;
  for (const auto& row : table) {
    ss_h += row.eps_h * row.eps_h;
    ss_a += row.eps_alpha * row.eps_alpha;
  }
  const double n = static_cast<double>(table.size());
  return {std::sqrt(ss_h / n), std::sqrt(ss_a / n)};
}

AcceptanceRange make_acceptance_range(double sigma_h, double sigma_alpha, double u,
                                      double coverage_target, bool joint) {
  if (!(coverage_target > 0.0 && coverage_target < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "coverage target must lie in (0, 1)");
  }
  if (sigma_h < 0.0 || sigma_alpha < 0.0 || u < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "sigmas and u must be non-negative");
  }
  return {sigma_h, sigma_alpha, u, u * sigma_h, u * sigma_alpha, coverage_target, joint};
}

double grid_value(std::int64_t k, double step) {
  const double inverse = std::round(1.0 / step);
  if (inverse >= 1.0 && std::abs(inverse * step - 1.0) < 1e-12) {
    return static_cast<double>(k) / inverse;
  }
  return static_cast<double>(k) * step;
}

namespace {

bool inside(double eps, double sigma, double u) { return std::abs(eps) <= u * sigma; }

// Smallest u with |eps| <= u * sigma; infinity if none exists.
double required_u(double eps, double sigma) {
  if (eps == 0.0) return 0.0;
  if (sigma == 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(eps) / sigma;
}

std::size_t needed_rows(std::size_t n, double coverage) {
  return static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(n) - 1e-9));
}

std::int64_t smallest_grid_index(const DeviationTable& table, double sigma_h, double sigma_alpha,
                                 double coverage, double step, std::optional<Parameter> only) {
  std::vector<double> need;
  need.reserve(table.size());
  for (const auto& row : table) {
    const double uh = required_u(row.eps_h, sigma_h);
    const double ua = required_u(row.eps_alpha, sigma_alpha);
    need.push_back(!only ? std::max(uh, ua) : (*only == Parameter::kHeight ? uh : ua));
  }
  const std::size_t m = needed_rows(table.size(), coverage);
  if (m == 0) return 0;
  std::nth_element(need.begin(), need.begin() + static_cast<std::ptrdiff_t>(m - 1), need.end());
  const double target = need[m - 1];
  if (!std::isfinite(target)) {
    throw Error(ErrorCode::kInvalidArgument,
                "coverage unreachable: deviations present where sigma is zero");
  }
  // Start just below the analytic answer and step up with the exact test.
  std::int64_t k = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(target / step)) - 2);
  const double required = static_cast<double>(m) / static_cast<double>(table.size());
  while (coverage_at(table, sigma_h, sigma_alpha, grid_value(k, step), only) < required) ++k;
  return k;
}

}  // namespace

double coverage_at(const DeviationTable& table, double sigma_h, double sigma_alpha, double u,
                   std::optional<Parameter> only) {
  if (table.empty()) return 0.0;
  std::size_t contained = 0;
  for (const auto& row : table) {
    const bool h_in = inside(row.eps_h, sigma_h, u);
    const bool a_in = inside(row.eps_alpha, sigma_alpha, u);
    if (!only) {
      contained += h_in && a_in;
    } else {
      contained += *only == Parameter::kHeight ? h_in : a_in;
    }
  }
  return static_cast<double>(contained) / static_cast<double>(table.size());
}

AcceptanceRange calibrate_u(const DeviationTable& table, double sigma_h, double sigma_alpha,
                            double coverage, const CalibrationOptions& options) {
  if (!(coverage > 0.0 && coverage < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "coverage must lie in (0, 1)");
  }
  if (!(options.grid_step > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "grid step must be positive");
  }
  if (table.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "calibration over an empty deviation table");
  }
  if (sigma_h < 0.0 || sigma_alpha < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "sigmas must be non-negative");
  }
  if (sigma_h == 0.0 && sigma_alpha == 0.0) {
    const bool all_zero = std::all_of(table.begin(), table.end(), [](const DeviationRow& r) {
      return r.eps_h == 0.0 && r.eps_alpha == 0.0;
    });
    if (!all_zero) {
      throw Error(ErrorCode::kInvalidArgument,
                  "both sigmas are zero but non-zero deviations are present");
    }
    return make_acceptance_range(0.0, 0.0, 0.0, coverage, options.joint);
  }

  std::int64_t k = 0;
  if (options.joint) {
    k = smallest_grid_index(table, sigma_h, sigma_alpha, coverage, options.grid_step, std::nullopt);
  } else {
    k = std::max(smallest_grid_index(table, sigma_h, sigma_alpha, coverage, options.grid_step,
                                     Parameter::kHeight),
                 smallest_grid_index(table, sigma_h, sigma_alpha, coverage, options.grid_step,
                                     Parameter::kAngle));
  }
  return make_acceptance_range(sigma_h, sigma_alpha, grid_value(k, options.grid_step), coverage,
                               options.joint);
}

AcceptanceResult acceptance_check(const WaterlineParams& pred, const GroundTruthLine& gt,
                                  const AcceptanceRange& range) {
  if (std::abs(pred.center_x - gt.center_x) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument,
                "prediction for '" + gt.image_id + "' uses center_x " +
                    std::to_string(pred.center_x) + ", consensus uses " +
                    std::to_string(gt.center_x));
  }
  AcceptanceResult r;
  r.eps_h = std::abs(gt.h - pred.h);
  r.eps_alpha = std::abs(gt.alpha - pred.alpha);
  r.h_ok = r.eps_h <= range.delta_h;
  r.alpha_ok = r.eps_alpha <= range.delta_alpha;
  r.accepted = r.h_ok && r.alpha_ok;
  return r;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::kEmptyDataset, "quantile of no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Quartiles quartiles(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  return {quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
}

StudyReport study_report(std::span<const AnnotationRecord> records,
                         std::span<const PredictionRecord> predictions,
                         const AcceptanceRange& range) {
  if (records.empty() || predictions.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "study report needs annotations and predictions");
  }
  const auto gts = aggregate_ground_truth(records);
  std::unordered_map<std::string, const GroundTruthLine*> by_image;
  for (const auto& gt : gts) by_image[gt.image_id] = &gt;

  std::set<std::string> predicted;
  StudyReport report;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> errors;
  std::size_t h_in = 0, a_in = 0, joint_in = 0;
  for (const auto& p : predictions) {
    if (!predicted.insert(p.image_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate prediction for '" + p.image_id + "'");
    }
    auto it = by_image.find(p.image_id);
    if (it == by_image.end()) {
      throw Error(ErrorCode::kMissingGroundTruth,
                  "prediction for '" + p.image_id + "' has no annotations");
    }
    const AcceptanceResult r = acceptance_check(p.params, *it->second, range);
    h_in += r.h_ok;
    a_in += r.alpha_ok;
    joint_in += r.accepted;
    report.per_image.push_back({p.image_id, r});
    auto add = [&](const std::string& key) {
      errors[key].first.push_back(r.eps_h);
      errors[key].second.push_back(r.eps_alpha);
    };
    add("all");
    if (p.cls) add(std::string(to_string(*p.cls)));
  }
  for (const auto& gt : gts) {
    if (!predicted.contains(gt.image_id)) {
      throw Error(ErrorCode::kMissingPrediction, "no prediction for image '" + gt.image_id + "'");
    }
  }

  const double n = static_cast<double>(predictions.size());
  report.n_images = predictions.size();
  report.h_rate = static_cast<double>(h_in) / n;
  report.alpha_rate = static_cast<double>(a_in) / n;
  report.joint_rate = static_cast<double>(joint_in) / n;
  for (const auto& [key, e] : errors) {
    report.errors[key] = {e.first.size(), quartiles(e.first), quartiles(e.second)};
  }
  return report;
}

// --- serialization ---------------------------------------------------------

namespace {

nlohmann::json column_json(double center_x) {
  if (std::floor(center_x) == center_x && std::abs(center_x) < 1e15) {
    return static_cast<std::int64_t>(center_x);
  }
  return center_x;
}

nlohmann::json quartiles_json(const Quartiles& q) {
  return {{"q1", q.q1}, {"median", q.median}, {"q3", q.q3}};
}

}  // namespace

nlohmann::json params_to_json(const WaterlineParams& params) {
  return {{"h", params.h}, {"alpha", params.alpha}, {"center_x", column_json(params.center_x)}};
}

nlohmann::json to_json(const AnnotationRecord& record) {
  return {{"image_id", record.image_id},
          {"expert_id", record.expert_id},
          {"h", record.params.h},
          {"alpha", record.params.alpha},
          {"center_x", column_json(record.params.center_x)},
          {"group", std::string(to_string(record.group))},
          {"modified", record.modified},
          {"timestamp", record.timestamp}};
}

AnnotationRecord annotation_from_json(const nlohmann::json& j, const std::string& where) {
  FieldReader r(j, where);
  AnnotationRecord a;
  a.image_id = r.string("image_id");
  a.expert_id = r.string("expert_id");
  a.params.h = r.number("h");
  a.params.alpha = r.number("alpha");
  a.params.center_x = r.number("center_x");
  if (!(std::abs(a.params.alpha) < 90.0)) r.fail("alpha must lie in (-90, 90)");
  if (a.params.center_x < 0.0) r.fail("center_x must be >= 0");
  try {
    a.group = parse_study_group(r.string("group"));
  } catch (const Error& e) {
    r.fail(e.what());
  }
  a.modified = r.boolean("modified");
  a.timestamp = r.integer("timestamp");
  return a;
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path) {
  std::vector<AnnotationRecord> out;
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& rec : read_ndjson(path)) {
    const std::string where = path.string() + ":" + std::to_string(rec.line);
    out.push_back(annotation_from_json(rec.value, where));
    if (!pairs.emplace(out.back().image_id, out.back().expert_id).second) {
      throw Error(ErrorCode::kSchemaViolation,
                  where + ": duplicate (image_id, expert_id) pair");
    }
  }
  return out;
}

void save_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> records) {
  std::vector<nlohmann::json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(to_json(r));
  write_ndjson(path, lines);
}

nlohmann::json to_json(const PredictionRecord& record) {
  nlohmann::json j = params_to_json(record.params);
  j["image_id"] = record.image_id;
  if (record.cls) {
    j["class"] = std::string(to_string(*record.cls));
    j["confidence"] = record.confidence;
  }
  return j;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::vector<PredictionRecord> out;
  for (const auto& rec : read_ndjson(path)) {
    FieldReader r(rec.value, path.string() + ":" + std::to_string(rec.line));
    if (r.has("error")) continue;
    PredictionRecord p;
    p.image_id = r.string("image_id");
    p.params.h = r.number("h");
    p.params.alpha = r.number("alpha");
    p.params.center_x = r.number("center_x");
    if (r.has("class")) p.cls = parse_discipline(r.string("class"));
    if (r.has("confidence")) p.confidence = r.number("confidence");
    out.push_back(std::move(p));
  }
  return out;
}

nlohmann::json to_json(const AcceptanceRange& range) {
  return {{"sigma_h", range.sigma_h},
          {"sigma_alpha", range.sigma_alpha},
          {"u", range.u},
          {"delta_h", range.delta_h},
          {"delta_alpha", range.delta_alpha},
          {"coverage_target", range.coverage_target},
          {"joint", range.joint}};
}

nlohmann::json to_json(const KruskalWallisResult& kw) {
  return {{"H", kw.h}, {"p", kw.p}, {"df", kw.df}};
}

nlohmann::json to_json(const StudyReport& report) {
  nlohmann::json errors = nlohmann::json::object();
  for (const auto& [key, e] : report.errors) {
    errors[key] = {{"count", e.count},
                   {"eps_h", quartiles_json(e.eps_h)},
                   {"eps_alpha", quartiles_json(e.eps_alpha)}};
  }
  nlohmann::json per_image = nlohmann::json::array();
  for (const auto& img : report.per_image) {
    per_image.push_back({{"image_id", img.image_id},
                         {"accepted", img.result.accepted},
                         {"h_ok", img.result.h_ok},
                         {"alpha_ok", img.result.alpha_ok},
                         {"eps_h", img.result.eps_h},
                         {"eps_alpha", img.result.eps_alpha}});
  }
  return {{"n_images", report.n_images},
          {"h_rate", report.h_rate},
          {"alpha_rate", report.alpha_rate},
          {"joint_rate", report.joint_rate},
          {"errors", errors},
          {"per_image", per_image}};
}

}  // namespace waterline
