#include "waterline/study.hpp"

#include <cstdio>
#include <set>

#include "waterline/error.hpp"
#include "waterline/ndjson.hpp"
#include "waterline/random.hpp"
#include "waterline/stats.hpp"

namespace waterline {

namespace {

constexpr std::string_view kRepeatSuffix = "#B";

std::string task_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "task-%04zu", i + 1);
  return buf;
}

}  // namespace

std::vector<StudyTask> build_study(std::span<const StudyImage> images,
                                   const std::map<std::string, WaterlineParams>& predictions,
                                   const StudySizes& sizes, std::uint64_t seed,
                                   const StudyOptions& options) {
  if (sizes.b > sizes.a) {
    throw Error(ErrorCode::kInfeasibleSizes, "group B is drawn from group A, so B <= A");
  }
  const std::size_t distinct = sizes.a + sizes.c + sizes.d;
  if (distinct == 0 || images.size() != distinct) {
    throw Error(ErrorCode::kInfeasibleSizes,
                "sizes need " + std::to_string(distinct) + " distinct images, got " +
                    std::to_string(images.size()));
  }
  std::set<std::string> ids;
  for (const auto& img : images) {
    if (!ids.insert(img.image_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate image '" + img.image_id + "'");
    }
    if (!predictions.contains(img.image_id)) {
      throw Error(ErrorCode::kMissingPrediction,
                  "no prediction for study image '" + img.image_id + "'");
    }
  }

  const auto order = seeded_permutation(images.size(), mix_seed(seed, 1));
  const auto b_pick = seeded_permutation(sizes.a, mix_seed(seed, 2));
  std::set<std::size_t> b_members(b_pick.begin(), b_pick.begin() + static_cast<std::ptrdiff_t>(sizes.b));

  std::vector<StudyTask> tasks;
  auto emit = [&](const StudyImage& img, StudyGroup group) {
    StudyTask t;
    t.task_id = task_name(tasks.size());
    t.image_id = img.image_id;
    t.image_file = img.image_file;
    t.width = img.width;
    t.height = img.height;
    t.initial_params = perturb(predictions.at(img.image_id), group);
    t.group = group;
    t.order_index = tasks.size();
    tasks.push_back(std::move(t));
  };

  for (std::size_t i = 0; i < sizes.a; ++i) {
    if (!options.reshow_b && b_members.contains(i)) continue;
    emit(images[order[i]], StudyGroup::kA);
  }
  // B follows the pick order so the subset is a pure function of the seed.
  for (std::size_t k = 0; k < sizes.b; ++k) emit(images[order[b_pick[k]]], StudyGroup::kB);
  for (std::size_t i = 0; i < sizes.c; ++i) emit(images[order[sizes.a + i]], StudyGroup::kC);
  for (std::size_t i = 0; i < sizes.d; ++i) {
    emit(images[order[sizes.a + sizes.c + i]], StudyGroup::kD);
  }
  return tasks;
}

std::vector<StudyTask> shuffle_for_expert(std::span<const StudyTask> tasks,
                                          const std::string& expert_id, std::uint64_t seed) {
  const auto perm = seeded_permutation(tasks.size(), mix_seed(seed, fnv1a64(expert_id)));
  std::vector<StudyTask> out;
  out.reserve(tasks.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.push_back(tasks[perm[i]]);
    out.back().order_index = i;
  }
  return out;
}

std::string item_id(const StudyTask& task) {
  if (task.group == StudyGroup::kB) return task.image_id + std::string(kRepeatSuffix);
  return task.image_id;
}

std::string source_image_id(const std::string& item_id) {
  if (item_id.ends_with(kRepeatSuffix)) {
    return item_id.substr(0, item_id.size() - kRepeatSuffix.size());
  }
  return item_id;
}

nlohmann::json to_json(const StudyTask& task) {
  return {{"task_id", task.task_id},
          {"image_id", task.image_id},
          {"image_file", task.image_file.string()},
          {"width", task.width},
          {"height", task.height},
          {"initial", params_to_json(task.initial_params)},
          {"group", std::string(to_string(task.group))},
          {"order_index", task.order_index}};
}

StudyTask task_from_json(const nlohmann::json& j, const std::string& where) {
  FieldReader r(j, where);
  StudyTask t;
  t.task_id = r.string("task_id");
  t.image_id = r.string("image_id");
  t.image_file = r.string("image_file");
  t.width = static_cast<int>(r.integer("width"));
  t.height = static_cast<int>(r.integer("height"));
  if (t.width <= 0 || t.height <= 0) r.fail("width and height must be positive");
  if (!j.contains("initial")) r.fail("missing field 'initial'");
  FieldReader init(j["initial"], where + " initial");
  t.initial_params = {init.number("h"), init.number("alpha"), init.number("center_x")};
  try {
    t.group = parse_study_group(r.string("group"));
  } catch (const Error& e) {
    r.fail(e.what());
  }
  const auto order = r.integer("order_index");
  if (order < 0) r.fail("order_index must be >= 0");
  t.order_index = static_cast<std::size_t>(order);
  return t;
}

void save_manifest(const std::filesystem::path& path, std::span<const StudyTask> tasks) {
  std::vector<nlohmann::json> lines;
  lines.reserve(tasks.size());
  for (const auto& t : tasks) lines.push_back(to_json(t));
  write_ndjson(path, lines);
}

std::vector<StudyTask> load_manifest(const std::filesystem::path& path) {
  std::vector<StudyTask> tasks;
  std::set<std::string> ids;
  for (const auto& rec : read_ndjson(path)) {
    const std::string where = path.string() + ":" + std::to_string(rec.line);
    tasks.push_back(task_from_json(rec.value, where));
    if (!ids.insert(tasks.back().task_id).second) {
      throw Error(ErrorCode::kSchemaViolation, where + ": duplicate task_id");
    }
  }
  return tasks;
}

}  // namespace waterline
