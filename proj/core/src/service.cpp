#include "waterline/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "waterline/error.hpp"
#include "waterline/ndjson.hpp"

namespace waterline {

namespace {

constexpr double kUnchangedTolerance = 1e-6;

ServiceResponse json_response(int status, nlohmann::json body) {
  return {status, std::move(body), {}, "application/json"};
}

ServiceResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

std::int64_t system_seconds() {
  using namespace std::chrono;
  return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

std::string content_type_for(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".pgm") return "image/x-portable-graymap";
  if (ext == ".bmp") return "image/bmp";
  return "application/octet-stream";
}

bool finite_number(const nlohmann::json& v) {
  return v.is_number() && std::isfinite(v.get<double>());
}

}  // namespace

AnnotationService::AnnotationService(ServiceOptions options) : options_(std::move(options)) {
  if (!options_.clock) options_.clock = system_seconds;
  tasks_ = options_.tasks;
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (!task_index_.emplace(tasks_[i].task_id, i).second) {
      throw Error(ErrorCode::kSchemaViolation, "duplicate task_id '" + tasks_[i].task_id + "'");
    }
  }
  experts_.insert(options_.experts.begin(), options_.experts.end());
  replay_log();
}

bool AnnotationService::known_expert(const std::string& expert_id) const {
  if (expert_id.empty()) return false;
  return experts_.empty() || experts_.contains(expert_id);
}

AnnotationService::Session& AnnotationService::session_for(const std::string& expert_id) {
  auto it = sessions_.find(expert_id);
  if (it != sessions_.end()) return it->second;
  Session s;
  for (const auto& t : shuffle_for_expert(tasks_, expert_id, options_.seed)) {
    s.order.push_back(task_index_.at(t.task_id));
  }
  return sessions_.emplace(expert_id, std::move(s)).first->second;
}

nlohmann::json AnnotationService::progress_body(const std::string& expert_id,
                                                const Session& s) const {
  return {{"expert_id", expert_id},
          {"completed", s.completed.size()},
          {"total", tasks_.size()},
          {"done", s.completed.size() == tasks_.size()}};
}

nlohmann::json AnnotationService::task_payload(const StudyTask& task,
                                               const std::string& expert_id) const {
  const Line line = params_to_line(task.initial_params);
  const double x_end = static_cast<double>(task.width - 1);
  nlohmann::json payload = {
      {"task_id", task.task_id},
      {"image_url", "/images/" + task.image_id},
      {"width", task.width},
      {"height", task.height},
      {"initial", params_to_json(task.initial_params)},
      {"endpoints", {{0.0, line(0.0)}, {x_end, line(x_end)}}},
  };
  if (!expert_id.empty()) payload["expert_id"] = expert_id;
  return payload;
}

ServiceResponse AnnotationService::next_task(const std::string& expert_id) {
  if (!known_expert(expert_id)) return error_response(400, "unknown expert '" + expert_id + "'");
  std::lock_guard lock(mutex_);
  Session& s = session_for(expert_id);
  for (std::size_t idx : s.order) {
    const StudyTask& t = tasks_[idx];
    if (!s.completed.contains(t.task_id)) {
      nlohmann::json payload = task_payload(t, expert_id);
      payload["progress"] = progress_body(expert_id, s);
      return json_response(200, std::move(payload));
    }
  }
  return json_response(404, progress_body(expert_id, s));
}

ServiceResponse AnnotationService::progress(const std::string& expert_id) {
  if (!known_expert(expert_id)) return error_response(400, "unknown expert '" + expert_id + "'");
  std::lock_guard lock(mutex_);
  return json_response(200, progress_body(expert_id, session_for(expert_id)));
}

ServiceResponse AnnotationService::submit_text(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    return error_response(422, std::string("malformed JSON: ") + e.what());
  }
  return submit(j);
}

ServiceResponse AnnotationService::submit(const nlohmann::json& body) {
  if (!body.is_object()) return error_response(422, "body must be a JSON object");
  if (!body.contains("task_id") || !body["task_id"].is_string() || !body.contains("expert_id") ||
      !body["expert_id"].is_string()) {
    return error_response(422, "task_id and expert_id must be strings");
  }
  const std::string task_id = body["task_id"].get<std::string>();
  const std::string expert_id = body["expert_id"].get<std::string>();
  if (!known_expert(expert_id)) return error_response(400, "unknown expert '" + expert_id + "'");
  auto ti = task_index_.find(task_id);
  if (ti == task_index_.end()) return error_response(404, "unknown task '" + task_id + "'");
  const StudyTask& task = tasks_[ti->second];

  WaterlineParams params;
  params.center_x = task.initial_params.center_x;
  if (body.contains("endpoints")) {
    const auto& e = body["endpoints"];
    if (!e.is_array() || e.size() != 2 || !e[0].is_array() || !e[1].is_array() ||
        e[0].size() != 2 || e[1].size() != 2 || !finite_number(e[0][0]) ||
        !finite_number(e[0][1]) || !finite_number(e[1][0]) || !finite_number(e[1][1])) {
      return error_response(422, "endpoints must be [[x0, y0], [x1, y1]] with finite numbers");
    }
    const double x0 = e[0][0].get<double>(), y0 = e[0][1].get<double>();
    const double x1 = e[1][0].get<double>(), y1 = e[1][1].get<double>();
    const double max_x = task.width - 1, max_y = task.height - 1;
    for (double x : {x0, x1}) {
      if (x < 0.0 || x > max_x) return error_response(422, "endpoint x outside the image");
    }
    for (double y : {y0, y1}) {
      if (y < 0.0 || y > max_y) return error_response(422, "endpoint y outside the image");
    }
    if (x0 == x1) return error_response(422, "endpoints share one column");
    params = line_to_params(line_through(x0, y0, x1, y1), params.center_x);
  } else if (body.contains("h") && body.contains("alpha")) {
    if (!finite_number(body["h"]) || !finite_number(body["alpha"])) {
      return error_response(422, "h and alpha must be finite numbers");
    }
    params.h = body["h"].get<double>();
    params.alpha = body["alpha"].get<double>();
    if (!(std::abs(params.alpha) < 90.0)) return error_response(422, "alpha must lie in (-90, 90)");
  } else {
    return error_response(422, "provide endpoints or h and alpha");
  }

  StoredAnnotation stored;
  stored.task_id = task_id;
  stored.record.image_id = item_id(task);
  stored.record.expert_id = expert_id;
  stored.record.params = params;
  stored.record.group = task.group;
  stored.record.modified = std::abs(params.h - task.initial_params.h) > kUnchangedTolerance ||
                           std::abs(params.alpha - task.initial_params.alpha) > kUnchangedTolerance;

  std::lock_guard lock(mutex_);
  Session& s = session_for(expert_id);
  if (s.completed.contains(task_id)) {
    return error_response(409, "task '" + task_id + "' already submitted by '" + expert_id + "'");
  }
  stored.record.timestamp = options_.clock();
  try {
    append_to_log(stored);
  } catch (const Error& e) {
    return error_response(500, e.what());
  }
  s.completed.insert(task_id);
  stored_.push_back(stored);

  nlohmann::json out = to_json(stored.record);
  out.erase("group");
  out["task_id"] = task_id;
  return json_response(201, std::move(out));
}

void AnnotationService::append_to_log(const StoredAnnotation& stored) {
  if (options_.log_path.empty()) return;
  nlohmann::json line = to_json(stored.record);
  line.erase("group");
  line["task_id"] = stored.task_id;
  const std::string text = line.dump() + "\n";
  const int fd = ::open(options_.log_path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw Error(ErrorCode::kIoError, "cannot open log '" + options_.log_path.string() + "'");
  std::size_t written = 0;
  while (written < text.size()) {
    const ssize_t n = ::write(fd, text.data() + written, text.size() - written);
    if (n < 0) {
      ::close(fd);
      throw Error(ErrorCode::kIoError, "write to record log failed");
    }
    written += static_cast<std::size_t>(n);
  }
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (!synced) throw Error(ErrorCode::kIoError, "fsync of record log failed");
}

void AnnotationService::replay_log() {
  if (options_.log_path.empty() || !std::filesystem::exists(options_.log_path)) return;
  for (const auto& rec : read_ndjson(options_.log_path)) {
    const std::string where = options_.log_path.string() + ":" + std::to_string(rec.line);
    FieldReader r(rec.value, where);
    const std::string task_id = r.string("task_id");
    auto ti = task_index_.find(task_id);
    if (ti == task_index_.end()) r.fail("log refers to unknown task '" + task_id + "'");
    nlohmann::json with_group = rec.value;
    with_group["group"] = std::string(to_string(tasks_[ti->second].group));
    StoredAnnotation stored{task_id, annotation_from_json(with_group, where)};
    Session& s = session_for(stored.record.expert_id);
    if (!s.completed.insert(task_id).second) r.fail("duplicate submission in log");
    stored_.push_back(std::move(stored));
  }
}

std::vector<AnnotationRecord> AnnotationService::records() const {
  std::lock_guard lock(mutex_);
  std::vector<AnnotationRecord> out;
  out.reserve(stored_.size());
  for (const auto& s : stored_) out.push_back(s.record);
  return out;
}

ServiceResponse AnnotationService::export_dataset() const {
  std::ostringstream text;
  for (const auto& r : records()) text << to_json(r).dump() << '\n';
  return {200, nullptr, text.str(), "application/x-ndjson"};
}

ServiceResponse AnnotationService::image(const std::string& image_id) const {
  for (const auto& t : tasks_) {
    if (t.image_id != image_id) continue;
    std::ifstream in(t.image_file, std::ios::binary);
    if (!in) return error_response(500, "image file unavailable");
    std::ostringstream bytes;
    bytes << in.rdbuf();
    return {200, nullptr, bytes.str(), content_type_for(t.image_file)};
  }
  return error_response(404, "unknown image '" + image_id + "'");
}

// --- HTTP ------------------------------------------------------------------

struct AnnotationServer::Impl {
  explicit Impl(AnnotationService& s) : service(s) {}
  AnnotationService& service;
  httplib::Server server;
};

namespace {

void write_response(httplib::Response& res, const ServiceResponse& r) {
  res.status = r.status;
  if (!r.raw.empty() || r.body.is_null()) {
    res.set_content(r.raw, r.content_type);
  } else {
    res.set_content(r.body.dump(), r.content_type);
  }
}

}  // namespace

AnnotationServer::AnnotationServer(AnnotationService& service)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto& svc = impl_->service;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.Get("/tasks/next", [&svc](const httplib::Request& req, httplib::Response& res) {
    write_response(res, svc.next_task(req.get_param_value("expert")));
  });
  srv.Get("/progress", [&svc](const httplib::Request& req, httplib::Response& res) {
    write_response(res, svc.progress(req.get_param_value("expert")));
  });
  srv.Post("/annotations", [&svc](const httplib::Request& req, httplib::Response& res) {
    write_response(res, svc.submit_text(req.body));
  });
  srv.Get("/export", [&svc](const httplib::Request&, httplib::Response& res) {
    write_response(res, svc.export_dataset());
  });
  srv.Get(R"(/images/(.+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    write_response(res, svc.image(req.matches[1]));
  });
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool AnnotationServer::listen() { return impl_->server.listen_after_bind(); }

void AnnotationServer::stop() {
  if (impl_) impl_->server.stop();
}

void AnnotationServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace waterline
