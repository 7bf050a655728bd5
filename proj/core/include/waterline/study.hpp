#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waterline/geometry.hpp"

namespace waterline {

struct StudyImage {
  std::string image_id;
  std::filesystem::path image_file;
  int width = 0;
  int height = 0;
};

/// One line shown to every expert. `group` stays server-side.
struct StudyTask {
  std::string task_id;
  std::string image_id;
  std::filesystem::path image_file;
  int width = 0;
  int height = 0;
  WaterlineParams initial_params;
  StudyGroup group = StudyGroup::kA;
  std::size_t order_index = 0;

  bool operator==(const StudyTask&) const = default;
};

struct StudySizes {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t c = 0;
  std::size_t d = 0;
};

struct StudyOptions {
  /// B images are shown a second time next to their unperturbed A instance.
  /// When false they replace the A instance instead.
  bool reshow_b = true;
};

/// Seeded group assignment. Requires b <= a and exactly a + c + d images,
/// each with a prediction (kInfeasibleSizes / kMissingPrediction otherwise).
std::vector<StudyTask> build_study(std::span<const StudyImage> images,
                                   const std::map<std::string, WaterlineParams>& predictions,
                                   const StudySizes& sizes, std::uint64_t seed,
                                   const StudyOptions& options = {});

/// Presentation order for one expert, a permutation fixed by (seed, expert_id).
/// order_index of the returned tasks is their position in that order.
std::vector<StudyTask> shuffle_for_expert(std::span<const StudyTask> tasks,
                                          const std::string& expert_id, std::uint64_t seed);

/// Identifier under which a task's annotations are aggregated. Re-shown B
/// tasks get their own item so each (item, expert) pair stays unique.
std::string item_id(const StudyTask& task);
/// Image whose prediction an item is compared against.
std::string source_image_id(const std::string& item_id);

nlohmann::json to_json(const StudyTask& task);
StudyTask task_from_json(const nlohmann::json& j, const std::string& where);

void save_manifest(const std::filesystem::path& path, std::span<const StudyTask> tasks);
std::vector<StudyTask> load_manifest(const std::filesystem::path& path);

}  // namespace waterline
