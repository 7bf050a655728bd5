#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "waterline/stats.hpp"
#include "waterline/study.hpp"

namespace waterline {

struct ServiceOptions {
  std::vector<StudyTask> tasks;
  /// Registered experts; empty means any non-empty id may join.
  std::vector<std::string> experts;
  std::uint64_t seed = 0;
  /// Append-only record log, replayed on start-up.
  std::filesystem::path log_path;
  std::function<std::int64_t()> clock;  // defaults to system time
};

/// Status code plus body; `body` is JSON unless `raw` is set.
struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
  std::string raw;
  std::string content_type = "application/json";
};

/// Study backend: per-expert task order, annotation intake and export.
/// Thread-safe; the record log is the single serialization point.
class AnnotationService {
 public:
  explicit AnnotationService(ServiceOptions options);

  ServiceResponse next_task(const std::string& expert_id);
  ServiceResponse submit(const nlohmann::json& body);
  ServiceResponse submit_text(const std::string& body);
  ServiceResponse progress(const std::string& expert_id);
  ServiceResponse image(const std::string& image_id) const;
  ServiceResponse export_dataset() const;

  /// Stored records with group joined back and image_id set to the study item.
  std::vector<AnnotationRecord> records() const;

  /// Task payload as sent to the UI: no group label.
  nlohmann::json task_payload(const StudyTask& task, const std::string& expert_id) const;

 private:
  struct Session {
    std::vector<std::size_t> order;  // indices into tasks_
    std::set<std::string> completed;
  };

  struct StoredAnnotation {
    std::string task_id;
    AnnotationRecord record;
  };

  bool known_expert(const std::string& expert_id) const;
  Session& session_for(const std::string& expert_id);
  nlohmann::json progress_body(const std::string& expert_id, const Session& s) const;
  void append_to_log(const StoredAnnotation& stored);
  void replay_log();

  ServiceOptions options_;
  std::vector<StudyTask> tasks_;
  std::map<std::string, std::size_t> task_index_;
  std::set<std::string> experts_;

  mutable std::mutex mutex_;
  std::map<std::string, Session> sessions_;
  std::vector<StoredAnnotation> stored_;
};

/// HTTP front end for AnnotationService.
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationService& service);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  /// Binds (port 0 picks a free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace waterline
