#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "waterline/config.hpp"
#include "waterline/study.hpp"
#include "waterline/synth.hpp"

namespace waterline::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitPartial = 1,
  kExitUnusable = 2,
};

/// Detection index -> one prediction (or error) record per image, in input order.
int cmd_detect(const std::filesystem::path& index_file, const std::filesystem::path& out_file,
               const Config& config, std::ostream& log);

/// Full consensus/calibration/acceptance run. The machine-readable report is
/// returned and, when `out_file` is set, written there.
struct EvaluateOutcome {
  int exit_code = kExitOk;
  nlohmann::json report;
};

EvaluateOutcome cmd_evaluate(const std::filesystem::path& annotations_file,
                             const std::filesystem::path& predictions_file, const Config& config,
                             const std::optional<std::filesystem::path>& out_file,
                             std::ostream& text);

int cmd_build_study(const std::filesystem::path& index_file,
                    const std::filesystem::path& predictions_file, const StudySizes& sizes,
                    std::uint64_t seed, const std::filesystem::path& out_manifest,
                    const Config& config, std::ostream& log, const StudyOptions& options = {});

struct MetricsOutcome {
  int exit_code = kExitOk;
  nlohmann::json report;
};

MetricsOutcome cmd_metrics(const std::filesystem::path& detection_index,
                           const std::filesystem::path& groundtruth_index,
                           const std::optional<std::filesystem::path>& out_file,
                           const Config& config, std::ostream& text);

/// Writes n synthetic masks plus detection index, ground-truth index and
/// truth records into `out_dir`.
int cmd_synth(const std::filesystem::path& out_dir, std::size_t n, std::uint64_t seed,
              const SynthBounds& bounds, const std::string& mask_format, std::ostream& log);

/// Parses "90,20,10,10".
StudySizes parse_sizes(const std::string& text);

}  // namespace waterline::cli
