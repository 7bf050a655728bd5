#include "waterline/service.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "commands.hpp"
#include "test_support.hpp"
#include "waterline/ndjson.hpp"
#include "waterline/stats.hpp"

namespace waterline {
namespace {

std::vector<StudyTask> flat_tasks(std::size_t n, const std::filesystem::path& dir = {}) {
  std::vector<StudyTask> tasks;
  for (std::size_t i = 0; i < n; ++i) {
    StudyTask t;
    t.task_id = "task-" + std::to_string(i + 1);
    t.image_id = "img" + std::to_string(i);
    t.image_file = dir / (t.image_id + ".png");
    t.width = 1024;
    t.height = 576;
    t.initial_params = {300.0, 0.0, 512};
    t.order_index = i;
    tasks.push_back(t);
  }
  return tasks;
}

ServiceOptions options_for(std::vector<StudyTask> tasks, std::vector<std::string> experts = {}) {
  ServiceOptions o;
  o.tasks = std::move(tasks);
  o.experts = std::move(experts);
  o.clock = [] { return std::int64_t{1700000000}; };
  return o;
}

nlohmann::json endpoints_body(const std::string& task, const std::string& expert, double y0,
                              double y1) {
  return {{"task_id", task}, {"expert_id", expert}, {"endpoints", {{0, y0}, {1023, y1}}}};
}

TEST(Service, PayloadHasEndpointsAndNoGroup) {
  auto tasks = flat_tasks(1);
  tasks[0].group = StudyGroup::kC;
  AnnotationService svc(options_for(tasks));
  const auto r = svc.next_task("alice");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["task_id"], "task-1");
  EXPECT_EQ(r.body["image_url"], "/images/img0");
  EXPECT_EQ(r.body["width"], 1024);
  EXPECT_EQ(r.body["endpoints"], nlohmann::json::parse("[[0.0, 300.0], [1023.0, 300.0]]"));
  EXPECT_EQ(r.body["initial"]["h"], 300.0);
  EXPECT_FALSE(r.body.contains("group"));
  EXPECT_FALSE(r.body["initial"].contains("group"));
  EXPECT_EQ(r.body["progress"]["completed"], 0);

  const std::string dumped = r.body.dump();
  EXPECT_EQ(dumped.find("group"), std::string::npos);
}

TEST(Service, FreshExpertGetsFirstOfTheirOrder) {
  const auto tasks = flat_tasks(6);
  AnnotationService svc(options_for(tasks));
  const auto order = shuffle_for_expert(tasks, "bob", 0);
  EXPECT_EQ(svc.next_task("bob").body["task_id"], order[0].task_id);
}

TEST(Service, SubmitExamples) {
  AnnotationService svc(options_for(flat_tasks(2)));
  auto r = svc.submit(endpoints_body("task-1", "alice", 300, 300));
  ASSERT_EQ(r.status, 201);
  EXPECT_FALSE(r.body["modified"].get<bool>());
  EXPECT_FALSE(r.body.contains("group"));

  r = svc.submit(endpoints_body("task-2", "alice", 303, 303));
  ASSERT_EQ(r.status, 201);
  EXPECT_TRUE(r.body["modified"].get<bool>());
  EXPECT_EQ(r.body["h"], 303.0);
  EXPECT_EQ(r.body["alpha"], 0.0);

  EXPECT_EQ(svc.submit(endpoints_body("task-2", "alice", 310, 310)).status, 409);
  EXPECT_EQ(svc.next_task("alice").status, 404);
  EXPECT_EQ(svc.next_task("alice").body["done"], true);
  EXPECT_EQ(svc.next_task("alice").body["completed"], 2);

  const auto rec = svc.records();
  ASSERT_EQ(rec.size(), 2u);
  EXPECT_EQ(rec[1].params.h, 303.0);
  EXPECT_EQ(rec[1].timestamp, 1700000000);
}

TEST(Service, ParamFormSubmission) {
  AnnotationService svc(options_for(flat_tasks(1)));
  const auto r = svc.submit({{"task_id", "task-1"}, {"expert_id", "a"}, {"h", 300.0}, {"alpha", 0.0}});
  ASSERT_EQ(r.status, 201);
  EXPECT_FALSE(r.body["modified"].get<bool>());
}

TEST(Service, Rejections) {
  AnnotationService svc(options_for(flat_tasks(1), {"alice"}));
  EXPECT_EQ(svc.next_task("mallory").status, 400);
  EXPECT_EQ(svc.progress("mallory").status, 400);
  EXPECT_EQ(svc.submit(endpoints_body("task-1", "mallory", 300, 300)).status, 400);
  EXPECT_EQ(svc.submit(endpoints_body("task-9", "alice", 300, 300)).status, 404);
  EXPECT_EQ(svc.submit_text("{not json").status, 422);
  EXPECT_EQ(svc.submit(nlohmann::json::array()).status, 422);
  EXPECT_EQ(svc.submit({{"task_id", "task-1"}}).status, 422);
  EXPECT_EQ(svc.submit({{"task_id", "task-1"}, {"expert_id", "alice"}}).status, 422);
  EXPECT_EQ(svc.submit(endpoints_body("task-1", "alice", 300, 600)).status, 422);
  EXPECT_EQ(svc.submit(endpoints_body("task-1", "alice", -1, 300)).status, 422);
  EXPECT_EQ(svc.submit({{"task_id", "task-1"},
                        {"expert_id", "alice"},
                        {"endpoints", {{0, 300}, {2000, 300}}}})
                .status,
            422);
  EXPECT_EQ(svc.submit({{"task_id", "task-1"},
                        {"expert_id", "alice"},
                        {"endpoints", {{5, 300}, {5, 310}}}})
                .status,
            422);
  EXPECT_EQ(svc.submit({{"task_id", "task-1"}, {"expert_id", "alice"}, {"h", 300}, {"alpha", 95}})
                .status,
            422);
  EXPECT_EQ(svc.submit({{"task_id", "task-1"}, {"expert_id", "alice"}, {"endpoints", "x"}}).status,
            422);
  EXPECT_TRUE(svc.records().empty());
}

TEST(Service, EndpointRoundTrip) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> y(10, 560);
  auto tasks = flat_tasks(200);
  AnnotationService svc(options_for(tasks));
  for (const auto& t : tasks) {
    const double y0 = y(rng), y1 = y(rng);
    ASSERT_EQ(svc.submit(endpoints_body(t.task_id, "a", y0, y1)).status, 201);
    StudyTask echo = t;
    echo.initial_params = svc.records().back().params;
    const auto e = svc.task_payload(echo, "a")["endpoints"];
    ASSERT_NEAR(e[0][1].get<double>(), y0, 0.01);
    ASSERT_NEAR(e[1][1].get<double>(), y1, 0.01);
  }
}

TEST(Service, ExportAndReimport) {
  testing::TempDir dir("export");
  AnnotationService svc(options_for(flat_tasks(3)));
  EXPECT_TRUE(svc.export_dataset().raw.empty());
  for (const char* e : {"alice", "bob"}) {
    for (int t = 1; t <= 3; ++t) {
      ASSERT_EQ(svc.submit(endpoints_body("task-" + std::to_string(t), e, 300 + t, 301)).status, 201);
    }
  }
  const auto out = svc.export_dataset();
  std::ofstream(dir / "export.ndjson") << out.raw;
  const auto back = load_annotations(dir / "export.ndjson");
  ASSERT_EQ(back.size(), 6u);
  EXPECT_EQ(back, svc.records());
}

TEST(Service, LogIsReplayed) {
  testing::TempDir dir("log");
  auto opts = options_for(flat_tasks(2));
  opts.log_path = dir / "records.ndjson";
  {
    AnnotationService svc(opts);
    ASSERT_EQ(svc.submit(endpoints_body("task-1", "alice", 290, 292)).status, 201);
  }
  for (const auto& rec : read_ndjson(opts.log_path)) EXPECT_FALSE(rec.value.contains("group"));
  AnnotationService again(opts);
  ASSERT_EQ(again.records().size(), 1u);
  EXPECT_EQ(again.submit(endpoints_body("task-1", "alice", 290, 292)).status, 409);
  EXPECT_EQ(again.progress("alice").body["completed"], 1);
}

TEST(Service, ConcurrentDuplicatesYieldOneSuccess) {
  testing::TempDir dir("race");
  auto opts = options_for(flat_tasks(1));
  opts.log_path = dir / "records.ndjson";
  AnnotationService svc(opts);
  std::atomic<int> ok{0}, conflict{0};
  std::vector<std::jthread> threads;
  for (int i = 0; i < 16; ++i) {
    threads.emplace_back([&] {
      const int s = svc.submit(endpoints_body("task-1", "alice", 300, 300)).status;
      if (s == 201) ++ok;
      if (s == 409) ++conflict;
    });
  }
  threads.clear();
  EXPECT_EQ(ok.load(), 1);
  EXPECT_EQ(conflict.load(), 15);
  EXPECT_EQ(read_ndjson(opts.log_path).size(), 1u);
}

class HttpService : public ::testing::Test {
 protected:
  void start(ServiceOptions opts) {
    service_ = std::make_unique<AnnotationService>(std::move(opts));
    server_ = std::make_unique<AnnotationServer>(*service_);
    port_ = server_->bind("127.0.0.1", 0);
    ASSERT_GT(port_, 0);
    thread_ = std::jthread([this] { server_->listen(); });
    server_->wait_until_ready();
  }
  void TearDown() override {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  std::unique_ptr<AnnotationService> service_;
  std::unique_ptr<AnnotationServer> server_;
  std::jthread thread_;
  int port_ = 0;
};

TEST_F(HttpService, Endpoints) {
  testing::TempDir dir("http");
  std::ofstream(dir / "img0.png", std::ios::binary) << "PNGDATA";
  start(options_for(flat_tasks(1, dir.path()), {"alice"}));
  auto c = client();

  auto r = c.Get("/tasks/next?expert=alice");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
  const auto payload = nlohmann::json::parse(r->body);
  EXPECT_FALSE(payload.contains("group"));

  EXPECT_EQ(c.Get("/tasks/next?expert=eve")->status, 400);
  r = c.Get("/images/img0");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "PNGDATA");
  EXPECT_EQ(c.Get("/images/nope")->status, 404);
  EXPECT_EQ(c.Options("/annotations")->status, 204);

  const auto body = endpoints_body("task-1", "alice", 300, 300).dump();
  EXPECT_EQ(c.Post("/annotations", "{", "application/json")->status, 422);
  EXPECT_EQ(c.Post("/annotations", body, "application/json")->status, 201);
  EXPECT_EQ(c.Post("/annotations", body, "application/json")->status, 409);
  r = c.Get("/tasks/next?expert=alice");
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(nlohmann::json::parse(r->body)["done"], true);
  EXPECT_EQ(nlohmann::json::parse(c.Get("/progress?expert=alice")->body)["completed"], 1);

  r = c.Get("/export");
  ASSERT_EQ(r->status, 200);
  std::istringstream in(r->body);
  EXPECT_EQ(parse_ndjson(in, "export").size(), 1u);
}

TEST_F(HttpService, ConcurrentDuplicatePosts) {
  start(options_for(flat_tasks(1)));
  std::atomic<int> ok{0};
  std::vector<std::jthread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      auto c = client();
      const auto r = c.Post("/annotations", endpoints_body("task-1", "x", 300, 300).dump(),
                            "application/json");
      if (r && r->status / 100 == 2) ++ok;
    });
  }
  threads.clear();
  EXPECT_EQ(ok.load(), 1);
}

TEST_F(HttpService, StudyEndToEnd) {
  testing::TempDir dir("e2e");
  std::vector<StudyImage> images;
  std::map<std::string, WaterlineParams> predictions;
  std::vector<nlohmann::json> pred_lines;
  for (int i = 0; i < 4; ++i) {
    const std::string id = "f" + std::to_string(i);
    images.push_back({id, dir / (id + ".png"), 1024, 576});
    predictions[id] = {280.0 + 5 * i, 0.1 * i, 512};
    pred_lines.push_back(to_json(PredictionRecord{id, predictions[id], Discipline::kKayak, 0.9}));
  }
  write_ndjson(dir / "predictions.ndjson", pred_lines);
  const auto tasks = build_study(images, predictions, {3, 1, 1, 0}, 7);
  ASSERT_EQ(tasks.size(), 5u);
  start(options_for(tasks, {"e1", "e2"}));

  auto c = client();
  for (const auto& [expert, offset] : {std::pair{"e1", 0.5}, std::pair{"e2", -0.5}}) {
    for (int k = 0; k < 5; ++k) {
      const auto r = c.Get(std::string("/tasks/next?expert=") + expert);
      ASSERT_EQ(r->status, 200);
      const auto task = nlohmann::json::parse(r->body);
      const std::string task_id = task["task_id"];
      const auto it = std::find_if(tasks.begin(), tasks.end(),
                                   [&](const StudyTask& t) { return t.task_id == task_id; });
      ASSERT_NE(it, tasks.end());
      // Each expert corrects the shown line back to the prediction, the two
      // of them off in opposite directions.
      const Line line = params_to_line(predictions.at(it->image_id));
      const auto body =
          endpoints_body(task_id, expert, line(0) + offset, line(1023) + 3 * offset);
      ASSERT_EQ(c.Post("/annotations", body.dump(), "application/json")->status, 201);
    }
    EXPECT_EQ(c.Get(std::string("/tasks/next?expert=") + expert)->status, 404);
  }
  std::ofstream(dir / "annotations.ndjson") << c.Get("/export")->body;
  ASSERT_EQ(load_annotations(dir / "annotations.ndjson").size(), 10u);

  std::ostringstream text;
  const auto outcome = cli::cmd_evaluate(dir / "annotations.ndjson", dir / "predictions.ndjson",
                                         Config{}, std::nullopt, text);
  ASSERT_EQ(outcome.exit_code, cli::kExitOk) << text.str();
  EXPECT_EQ(outcome.report["n_images"], 5);
  EXPECT_EQ(outcome.report["report"]["joint_rate"], 1.0);
  EXPECT_GT(outcome.report["acceptance_range"]["sigma_h"].get<double>(), 0.5);
  EXPECT_GT(outcome.report["acceptance_range"]["sigma_alpha"].get<double>(), 0.05);
}

}  // namespace
}  // namespace waterline
