#include <csignal>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "waterline/error.hpp"
#include "waterline/service.hpp"

namespace {

waterline::AnnotationServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

struct ConfigFlags {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<double> center_x;
  std::optional<double> coverage;
  bool joint = false;
  bool per_parameter = false;

  waterline::Config resolve() const {
    waterline::Config c = config_file.empty() ? waterline::Config{} : waterline::load_config(config_file);
    if (seed) c.seed = *seed;
    if (center_x) c.center_x = *center_x;
    if (coverage) c.coverage_target = *coverage;
    if (joint) c.joint_calibration = true;
    if (per_parameter) c.joint_calibration = false;
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  using namespace waterline;
  CLI::App app{"Waterline estimation and expert-study evaluation toolkit"};
  app.require_subcommand(1);

  ConfigFlags flags;
  app.add_option("--config", flags.config_file, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "RNG seed");
  app.add_option("--center-x", flags.center_x, "Reference column for h (default: width/2)");
  app.add_option("--coverage", flags.coverage, "Coverage target for u calibration");
  auto* joint = app.add_flag("--joint", flags.joint, "Calibrate u jointly over h and alpha");
  app.add_flag("--per-parameter", flags.per_parameter, "Calibrate u per parameter")->excludes(joint);

  std::string index_file, out_file, annotations_file, predictions_file, gt_index, sizes_text;

  auto* detect = app.add_subcommand("detect", "Predict waterlines for a detection index");
  detect->add_option("index", index_file, "Detection index (NDJSON)")->required();
  detect->add_option("-o,--out", out_file, "Prediction records (NDJSON)")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Consensus, agreement and acceptance report");
  evaluate->add_option("annotations", annotations_file, "Annotation dataset (NDJSON)")->required();
  evaluate->add_option("predictions", predictions_file, "Prediction records (NDJSON)")->required();
  evaluate->add_option("-o,--out", out_file, "Machine-readable report (JSON)");

  bool replace_b = false;
  auto* build = app.add_subcommand("build-study", "Assign study groups and perturbed initial lines");
  build->add_option("index", index_file, "Detection index (NDJSON)")->required();
  build->add_option("predictions", predictions_file, "Prediction records (NDJSON)")->required();
  build->add_option("--sizes", sizes_text, "Group sizes A,B,C,D")->default_val("90,20,10,10");
  build->add_option("-o,--out", out_file, "Study manifest (NDJSON)")->required();
  build->add_flag("--replace-b", replace_b, "Group B replaces its A instance instead of repeating it");

  auto* metrics = app.add_subcommand("metrics", "IoU and per-class F1 of detections");
  metrics->add_option("detections", index_file, "Detection index (NDJSON)")->required();
  metrics->add_option("groundtruth", gt_index, "Ground-truth index (NDJSON)")->required();
  metrics->add_option("-o,--out", out_file, "Machine-readable report (JSON)");

  std::string manifest_file, log_file, host = "127.0.0.1";
  std::vector<std::string> experts;
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the expert annotation service");
  serve->add_option("manifest", manifest_file, "Study manifest (NDJSON)")->required();
  serve->add_option("--log", log_file, "Append-only annotation log")->default_val("annotations.log.ndjson");
  serve->add_option("--expert", experts, "Registered expert id (repeatable; none = open)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Bind port");

  std::string synth_dir, synth_format = "png";
  std::size_t synth_n = 10;
  auto* synth = app.add_subcommand("synth", "Write synthetic masks with known waterlines");
  synth->add_option("out_dir", synth_dir, "Output directory")->required();
  synth->add_option("-n,--count", synth_n, "Number of samples");
  synth->add_option("--format", synth_format, "Mask format: png, pgm or rle");

  CLI11_PARSE(app, argc, argv);

  Config config;
  try {
    config = flags.resolve();
  } catch (const Error& e) {
    std::cerr << "config: " << e.what() << '\n';
    return cli::kExitUnusable;
  }

  if (*detect) return cli::cmd_detect(index_file, out_file, config, std::cerr);

  if (*evaluate) {
    std::optional<std::filesystem::path> out;
    if (!out_file.empty()) out = out_file;
    return cli::cmd_evaluate(annotations_file, predictions_file, config, out, std::cout).exit_code;
  }

  if (*build) {
    try {
      const StudySizes sizes = cli::parse_sizes(sizes_text);
      return cli::cmd_build_study(index_file, predictions_file, sizes, config.seed, out_file, config,
                                  std::cerr, {.reshow_b = !replace_b});
    } catch (const Error& e) {
      std::cerr << "build-study: " << e.what() << '\n';
      return cli::kExitUnusable;
    }
  }

  if (*metrics) {
    std::optional<std::filesystem::path> out;
    if (!out_file.empty()) out = out_file;
    return cli::cmd_metrics(index_file, gt_index, out, config, std::cout).exit_code;
  }

  if (*synth) return cli::cmd_synth(synth_dir, synth_n, config.seed, SynthBounds{}, synth_format, std::cerr);

  if (*serve) {
    try {
      ServiceOptions options;
      options.tasks = load_manifest(manifest_file);
      options.experts = experts;
      options.seed = config.seed;
      options.log_path = log_file;
      AnnotationService service(std::move(options));
      AnnotationServer server(service);
      if (server.bind(host, port) < 0) {
        std::cerr << "serve: cannot bind " << host << ":" << port << '\n';
        return cli::kExitUnusable;
      }
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cerr << "serve: listening on http://" << host << ":" << port << '\n';
      server.listen();
      g_server = nullptr;
      return cli::kExitOk;
    } catch (const Error& e) {
      std::cerr << "serve: " << e.what() << '\n';
      return cli::kExitUnusable;
    }
  }
  return cli::kExitOk;
}
