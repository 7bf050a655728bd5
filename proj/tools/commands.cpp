#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

#include "waterline/error.hpp"
#include "waterline/mask_io.hpp"
#include "waterline/ndjson.hpp"
#include "waterline/pipeline.hpp"
#include "waterline/segmentation.hpp"
#include "waterline/stats.hpp"

namespace waterline::cli {

namespace {

/// Runs fn(i) for i in [0, n) on a small worker pool. Results are stored by
/// the caller per index, so output order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

nlohmann::json error_record(const std::string& image_id, ErrorCode code, const std::string& what,
                            const std::string& hash) {
  return {{"image_id", image_id},
          {"error", std::string(to_string(code))},
          {"message", what},
          {"config_hash", hash}};
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

StudySizes parse_sizes(const std::string& text) {
  std::vector<std::size_t> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      parts.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kInvalidArgument, "bad group size '" + item + "'");
    }
  }
  if (parts.size() != 4) {
    throw Error(ErrorCode::kInvalidArgument, "sizes must be four integers A,B,C,D");
  }
  return {parts[0], parts[1], parts[2], parts[3]};
}

int cmd_detect(const std::filesystem::path& index_file, const std::filesystem::path& out_file,
               const Config& config, std::ostream& log) {
  std::vector<DetectionIndexEntry> index;
  try {
    config.validate();
    index = load_detection_index(index_file);
  } catch (const Error& e) {
    log << "detect: " << e.what() << '\n';
    return kExitUnusable;
  }
  const std::string hash = config_hash(config);
  std::vector<nlohmann::json> out(index.size());
  std::vector<char> failed(index.size(), 0);
  parallel_for(index.size(), [&](std::size_t i) {
    const auto& entry = index[i];
    try {
      const DetectionSet set = load_detection_set(entry);
      const Detection& chosen = select_instance(set);
      PredictionRecord p{entry.image_id, detect_waterline(chosen.mask, config), chosen.cls,
                         chosen.confidence};
      out[i] = to_json(p);
      out[i]["config_hash"] = hash;
    } catch (const Error& e) {
      out[i] = error_record(entry.image_id, e.code(), e.what(), hash);
      failed[i] = 1;
    }
  });
  try {
    write_ndjson(out_file, out);
  } catch (const Error& e) {
    log << "detect: " << e.what() << '\n';
    return kExitUnusable;
  }
  const auto errors = std::count(failed.begin(), failed.end(), 1);
  log << "detect: " << index.size() - errors << " predictions, " << errors << " errors\n";
  return errors > 0 ? kExitPartial : kExitOk;
}

EvaluateOutcome cmd_evaluate(const std::filesystem::path& annotations_file,
                             const std::filesystem::path& predictions_file, const Config& config,
                             const std::optional<std::filesystem::path>& out_file,
                             std::ostream& text) {
  EvaluateOutcome outcome;
  try {
    config.validate();
    const auto records = load_annotations(annotations_file);
    const auto predictions = load_predictions(predictions_file);
    if (records.empty()) throw Error(ErrorCode::kEmptyDataset, "annotation dataset is empty");

    const auto gts = aggregate_ground_truth(records);
    const DeviationTable table = deviations(records, gts);

    std::set<std::string> experts;
    for (const auto& r : records) experts.insert(r.expert_id);
    nlohmann::json kw = nlohmann::json::object();
    for (auto [name, which] : {std::pair{"h", Parameter::kHeight}, std::pair{"alpha", Parameter::kAngle}}) {
      if (experts.size() >= 2 && table.size() >= 3) {
        kw[name] = to_json(kruskal_wallis(expert_groups(table, which)));
      } else {
        kw[name] = nullptr;
      }
    }

    const PooledSigma sigma = pooled_sigma(table);
    const AcceptanceRange range =
        calibrate_u(table, sigma.sigma_h, sigma.sigma_alpha, config.coverage_target,
                    {config.u_grid_step, config.joint_calibration});

    // Study items map back to the image whose prediction they judge.
    std::map<std::string, const PredictionRecord*> by_image;
    for (const auto& p : predictions) {
      if (!by_image.emplace(p.image_id, &p).second) {
        throw Error(ErrorCode::kSchemaViolation, "duplicate prediction for '" + p.image_id + "'");
      }
    }
    std::set<std::string> used;
    std::vector<PredictionRecord> aligned;
    for (const auto& gt : gts) {
      const std::string source = source_image_id(gt.image_id);
      auto it = by_image.find(source);
      if (it == by_image.end()) {
        throw Error(ErrorCode::kMissingPrediction, "no prediction for image '" + source + "'");
      }
      used.insert(source);
      PredictionRecord p = *it->second;
      p.image_id = gt.image_id;
      aligned.push_back(std::move(p));
    }
    for (const auto& p : predictions) {
      if (!used.contains(p.image_id)) {
        throw Error(ErrorCode::kMissingGroundTruth,
                    "prediction for '" + p.image_id + "' has no annotations");
      }
    }
    const StudyReport report = study_report(records, aligned, range);

    outcome.report = {{"config", to_json(config)},
                      {"config_hash", config_hash(config)},
                      {"n_records", records.size()},
                      {"n_experts", experts.size()},
                      {"n_images", gts.size()},
                      {"kruskal_wallis", kw},
                      {"acceptance_range", to_json(range)},
                      {"report", to_json(report)}};

    text << "annotations: " << records.size() << " from " << experts.size() << " experts over "
         << gts.size() << " images\n";
    for (const char* name : {"h", "alpha"}) {
      if (kw[name].is_null()) {
        text << "kruskal-wallis " << name << ": n/a (needs >= 2 experts)\n";
      } else {
        text << "kruskal-wallis " << name << ": H=" << fixed(kw[name]["H"].get<double>())
             << " p=" << fixed(kw[name]["p"].get<double>()) << '\n';
      }
    }
    text << "sigma_h=" << fixed(range.sigma_h) << " px  sigma_alpha=" << fixed(range.sigma_alpha)
         << " deg\n";
    text << "u=" << fixed(range.u, 1) << (range.joint ? " (joint)" : " (per-parameter)")
         << "  delta_h=" << fixed(range.delta_h, 2) << " px  delta_alpha="
         << fixed(range.delta_alpha, 2) << " deg\n";
    text << "acceptance: joint=" << fixed(report.joint_rate, 3) << " h=" << fixed(report.h_rate, 3)
         << " alpha=" << fixed(report.alpha_rate, 3) << '\n';
    for (const auto& [key, e] : report.errors) {
      text << "errors[" << key << "] n=" << e.count << " eps_h q1/med/q3=" << fixed(e.eps_h.q1, 2)
           << "/" << fixed(e.eps_h.median, 2) << "/" << fixed(e.eps_h.q3, 2)
           << " eps_alpha q1/med/q3=" << fixed(e.eps_alpha.q1, 3) << "/"
           << fixed(e.eps_alpha.median, 3) << "/" << fixed(e.eps_alpha.q3, 3) << '\n';
    }
    if (out_file) write_ndjson(*out_file, {outcome.report});
  } catch (const Error& e) {
    text << "evaluate: " << e.what() << '\n';
    outcome.exit_code = kExitUnusable;
  }
  return outcome;
}

int cmd_build_study(const std::filesystem::path& index_file,
                    const std::filesystem::path& predictions_file, const StudySizes& sizes,
                    std::uint64_t seed, const std::filesystem::path& out_manifest,
                    const Config& config, std::ostream& log, const StudyOptions& options) {
  try {
    const auto index = load_detection_index(index_file);
    std::map<std::string, WaterlineParams> predictions;
    for (const auto& p : load_predictions(predictions_file)) predictions[p.image_id] = p.params;

    std::vector<StudyImage> images;
    images.reserve(index.size());
    for (const auto& entry : index) {
      StudyImage img{entry.image_id, entry.image_file, 0, 0};
      try {
        std::tie(img.width, img.height) = raster_size(entry.image_file);
      } catch (const Error&) {
        if (entry.detections.empty()) throw;
        const Mask m = read_mask(entry.detections.front().mask_file);
        img.width = m.width();
        img.height = m.height();
      }
      images.push_back(std::move(img));
    }
    const auto tasks = build_study(images, predictions, sizes, seed, options);
    const std::string hash = config_hash(config);
    std::vector<nlohmann::json> lines;
    for (const auto& t : tasks) {
      auto j = to_json(t);
      j["config_hash"] = hash;
      lines.push_back(std::move(j));
    }
    write_ndjson(out_manifest, lines);
    log << "build-study: " << tasks.size() << " tasks over " << images.size() << " images\n";
    return kExitOk;
  } catch (const Error& e) {
    log << "build-study: " << e.what() << '\n';
    return kExitUnusable;
  }
}

MetricsOutcome cmd_metrics(const std::filesystem::path& detection_index,
                           const std::filesystem::path& groundtruth_index,
                           const std::optional<std::filesystem::path>& out_file,
                           const Config& config, std::ostream& text) {
  MetricsOutcome outcome;
  std::vector<DetectionIndexEntry> dets;
  std::vector<GroundTruthIndexEntry> gts;
  try {
    dets = load_detection_index(detection_index);
    gts = load_groundtruth_index(groundtruth_index);
    std::set<std::string> a, b;
    for (const auto& d : dets) a.insert(d.image_id);
    for (const auto& g : gts) b.insert(g.image_id);
    if (a != b) throw Error(ErrorCode::kInvalidArgument, "detection and ground-truth image sets differ");
  } catch (const Error& e) {
    text << "metrics: " << e.what() << '\n';
    outcome.exit_code = kExitUnusable;
    return outcome;
  }
  std::map<std::string, const GroundTruthIndexEntry*> gt_by_id;
  for (const auto& g : gts) gt_by_id[g.image_id] = &g;

  struct Row {
    std::string image_id;
    std::optional<double> iou;
    Discipline pred = Discipline::kCanoe;
    Discipline truth = Discipline::kCanoe;
    std::optional<nlohmann::json> error;
  };
  std::vector<Row> rows(dets.size());
  parallel_for(dets.size(), [&](std::size_t i) {
    Row& row = rows[i];
    row.image_id = dets[i].image_id;
    try {
      const GroundTruthMask gt = load_groundtruth(*gt_by_id.at(row.image_id));
      const DetectionSet set = load_detection_set(dets[i]);
      const Detection& chosen = select_instance(set);
      row.iou = iou(chosen.mask, gt.mask);
      row.pred = chosen.cls;
      row.truth = gt.cls;
    } catch (const Error& e) {
      row.error = error_record(row.image_id, e.code(), e.what(), config_hash(config));
    }
  });

  std::vector<double> ious;
  std::vector<Discipline> preds, truths;
  nlohmann::json per_image = nlohmann::json::array();
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& row : rows) {
    if (row.error) {
      errors.push_back(*row.error);
      continue;
    }
    ious.push_back(*row.iou);
    preds.push_back(row.pred);
    truths.push_back(row.truth);
    per_image.push_back({{"image_id", row.image_id},
                         {"iou", *row.iou},
                         {"predicted_class", std::string(to_string(row.pred))},
                         {"true_class", std::string(to_string(row.truth))}});
  }
  nlohmann::json summary = nullptr;
  if (!ious.empty()) {
    const double n = static_cast<double>(ious.size());
    double mean = 0.0;
    for (double v : ious) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : ious) var += (v - mean) * (v - mean);
    summary = {{"count", ious.size()},
               {"mean", mean},
               {"std", std::sqrt(var / n)},
               {"min", *std::min_element(ious.begin(), ious.end())},
               {"max", *std::max_element(ious.begin(), ious.end())}};
  }
  outcome.report = {{"config_hash", config_hash(config)},
                    {"iou", summary},
                    {"f1", {{"canoe", f1_per_class(preds, truths, Discipline::kCanoe)},
                            {"kayak", f1_per_class(preds, truths, Discipline::kKayak)}}},
                    {"per_image", per_image},
                    {"errors", errors}};

  if (!summary.is_null()) {
    text << "iou: n=" << ious.size() << " mean=" << fixed(summary["mean"].get<double>())
         << " std=" << fixed(summary["std"].get<double>())
         << " min=" << fixed(summary["min"].get<double>())
         << " max=" << fixed(summary["max"].get<double>()) << '\n';
  }
  text << "f1: canoe=" << fixed(outcome.report["f1"]["canoe"].get<double>())
       << " kayak=" << fixed(outcome.report["f1"]["kayak"].get<double>()) << '\n';
  if (!errors.empty()) text << "metrics: " << errors.size() << " images failed\n";
  outcome.exit_code = errors.empty() ? kExitOk : kExitPartial;
  try {
    if (out_file) write_ndjson(*out_file, {outcome.report});
  } catch (const Error& e) {
    text << "metrics: " << e.what() << '\n';
    outcome.exit_code = kExitUnusable;
  }
  return outcome;
}

int cmd_synth(const std::filesystem::path& out_dir, std::size_t n, std::uint64_t seed,
              const SynthBounds& bounds, const std::string& mask_format, std::ostream& log) {
  if (mask_format != "png" && mask_format != "pgm" && mask_format != "rle") {
    log << "synth: mask format must be png, pgm or rle\n";
    return kExitUnusable;
  }
  try {
    std::filesystem::create_directories(out_dir);
    const auto samples = generate_batch(n, bounds, seed);
    std::vector<nlohmann::json> index, groundtruth, truth;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      char id[32];
      std::snprintf(id, sizeof id, "synth-%04zu", i + 1);
      const std::string image_file = std::string(id) + ".png";
      const std::string mask_file = std::string(id) + ".mask." + mask_format;
      write_mask_raster(s.mask, out_dir / image_file);
      write_mask(s.mask, out_dir / mask_file);
      const std::string cls = (s.spec.seed & 1) ? "kayak" : "canoe";
      index.push_back({{"image_id", id},
                       {"image_file", image_file},
                       {"detections", {{{"class", cls}, {"confidence", 0.99}, {"mask_file", mask_file}}}}});
      groundtruth.push_back({{"image_id", id}, {"class", cls}, {"mask_file", mask_file}});
      auto t = params_to_json(s.truth);
      t["image_id"] = id;
      truth.push_back(std::move(t));
    }
    write_ndjson(out_dir / "detections.ndjson", index);
    write_ndjson(out_dir / "groundtruth.ndjson", groundtruth);
    write_ndjson(out_dir / "truth.ndjson", truth);
    log << "synth: wrote " << samples.size() << " samples to " << out_dir.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    log << "synth: " << e.what() << '\n';
    return kExitUnusable;
  }
}

}  // namespace waterline::cli
