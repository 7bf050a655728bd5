#include "waterline/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include "test_support.hpp"
#include "waterline/error.hpp"

namespace waterline {
namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an exception";
  return ErrorCode::kInvalidArgument;
}

AnnotationRecord ann(const std::string& image, const std::string& expert, double h,
                     double alpha, double cx = 512) {
  return {image, expert, {h, alpha, cx}, StudyGroup::kA, true, 0};
}

DeviationTable rows(const std::vector<std::pair<double, double>>& eps) {
  DeviationTable t;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    t.push_back({"img" + std::to_string(i), "e", eps[i].first, eps[i].second});
  }
  return t;
}

TEST(AggregateGroundTruth, Examples) {
  const std::vector<AnnotationRecord> r{ann("i", "a", 300, -0.2), ann("i", "b", 302, 0.2),
                                         ann("i", "c", 304, 0.0), ann("j", "a", 250, 1.5)};
  const auto gt = aggregate_ground_truth(r);
  ASSERT_EQ(gt.size(), 2u);
  EXPECT_EQ(gt[0].image_id, "i");
  EXPECT_DOUBLE_EQ(gt[0].h, 302.0);
  EXPECT_NEAR(gt[0].alpha, 0.0, 1e-15);
  EXPECT_EQ(gt[0].n_experts, 3u);
  EXPECT_EQ(gt[1].h, 250.0);
  EXPECT_EQ(gt[1].alpha, 1.5);
  EXPECT_EQ(gt[1].center_x, 512.0);
}

TEST(AggregateGroundTruth, Errors) {
  const std::vector<AnnotationRecord> mixed{ann("i", "a", 300, 0, 512), ann("i", "b", 300, 0, 500)};
  EXPECT_EQ(code_of([&] { aggregate_ground_truth(mixed); }), ErrorCode::kMixedCenterX);
  const std::vector<AnnotationRecord> dup{ann("i", "a", 300, 0), ann("i", "a", 301, 0)};
  EXPECT_EQ(code_of([&] { aggregate_ground_truth(dup); }), ErrorCode::kInvalidArgument);
}

TEST(Deviations, Examples) {
  const std::vector<AnnotationRecord> r{ann("i", "a", 300, 0), ann("i", "b", 302, 0),
                                         ann("i", "c", 304, 0)};
  const auto gt = aggregate_ground_truth(r);
  const auto d = deviations(r, gt);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0].eps_h, -2.0);
  EXPECT_EQ(d[1].eps_h, 0.0);
  EXPECT_EQ(d[2].eps_h, 2.0);

  const std::vector<AnnotationRecord> one{ann("k", "a", 303, 0.1)};
  const std::vector<GroundTruthLine> ref{{"k", 302, 0.1, 512, 1}};
  EXPECT_EQ(deviations(one, ref)[0].eps_h, 1.0);
  EXPECT_EQ(deviations(one, ref)[0].eps_alpha, 0.0);
  EXPECT_EQ(code_of([&] { deviations(one, std::vector<GroundTruthLine>{}); }),
            ErrorCode::kMissingGroundTruth);
}

TEST(Deviations, SumToZeroPerImage) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> noise(0.0, 2.0);
  std::vector<AnnotationRecord> r;
  for (int i = 0; i < 30; ++i) {
    for (int e = 0; e < 1 + i % 7; ++e) {
      r.push_back(ann("img" + std::to_string(i), "exp" + std::to_string(e), 300 + noise(rng),
                      noise(rng) * 0.1));
    }
  }
  const auto d = deviations(r, aggregate_ground_truth(r));
  std::map<std::string, std::pair<double, double>> sums;
  for (const auto& row : d) {
    sums[row.image_id].first += row.eps_h;
    sums[row.image_id].second += row.eps_alpha;
  }
  for (const auto& [id, s] : sums) {
    EXPECT_NEAR(s.first, 0.0, 1e-9) << id;
    EXPECT_NEAR(s.second, 0.0, 1e-9) << id;
  }
}

TEST(KruskalWallis, Examples) {
  auto r = kruskal_wallis({{1, 2, 3}, {4, 5, 6}});
  EXPECT_NEAR(r.h, 3.8571, 1e-4);
  EXPECT_NEAR(r.p, 0.0495, 1e-4);
  EXPECT_EQ(r.df, 1u);
  r = kruskal_wallis({{1, 2, 3}, {1, 2, 3}});
  EXPECT_NEAR(r.h, 0.0, 1e-12);
  EXPECT_NEAR(r.p, 1.0, 1e-12);
  r = kruskal_wallis({{5, 5}, {5, 5, 5}});
  EXPECT_EQ(r.h, 0.0);
  EXPECT_EQ(r.p, 1.0);
}

TEST(KruskalWallis, Errors) {
  EXPECT_THROW(kruskal_wallis({{1, 2, 3}}), Error);
  EXPECT_THROW(kruskal_wallis({{1, 2}, {}}), Error);
  EXPECT_THROW(kruskal_wallis({{1}, {2}}), Error);
  EXPECT_THROW(kruskal_wallis({{1, NAN}, {2}}), Error);
}

TEST(KruskalWallis, MatchesFrozenReferenceAndOracle) {
  std::ifstream in(testing::data_path("kruskal_wallis_cases.json"));
  ASSERT_TRUE(in);
  const auto fixture = nlohmann::json::parse(in);
  ASSERT_GE(fixture["cases"].size(), 21u);
  for (const auto& c : fixture["cases"]) {
    const auto groups = c["groups"].get<std::vector<std::vector<double>>>();
    const auto r = kruskal_wallis(groups);
    EXPECT_NEAR(r.h, c["H"].get<double>(), 1e-6) << c["name"];
    EXPECT_NEAR(r.p, c["p"].get<double>(), 1e-6) << c["name"];
    EXPECT_NEAR(r.h, testing::kruskal_rank_variance(groups), 1e-6) << c["name"];
  }
}

TEST(KruskalWallis, Properties) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> value(0, 12), size(1, 9), count(2, 5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> groups(count(rng));
    std::size_t total = 0;
    for (auto& g : groups) {
      g.resize(size(rng));
      for (auto& v : g) v = value(rng) * 0.25;
      total += g.size();
    }
    if (total < 3) continue;
    const auto r = kruskal_wallis(groups);
    ASSERT_GE(r.h, 0.0);
    ASSERT_GT(r.p, 0.0);
    ASSERT_LE(r.p, 1.0);
    ASSERT_NEAR(r.h, testing::kruskal_rank_variance(groups), 1e-9);

    auto transformed = groups;
    for (auto& g : transformed) {
      for (auto& v : g) v = std::exp(v) * 3.0 - 7.0;
    }
    ASSERT_NEAR(kruskal_wallis(transformed).h, r.h, 1e-9);
  }
}

TEST(ExpertGroups, OnePerExpertSorted) {
  const DeviationTable t{{"i", "zed", 1, 0.1}, {"i", "amy", -1, -0.1}, {"j", "zed", 2, 0.2}};
  const auto g = expert_groups(t, Parameter::kHeight);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0], (std::vector<double>{-1}));
  EXPECT_EQ(g[1], (std::vector<double>{1, 2}));
  EXPECT_EQ(expert_groups(t, Parameter::kAngle)[1], (std::vector<double>{0.1, 0.2}));
}

TEST(PooledSigma, Examples) {
  EXPECT_EQ(pooled_sigma(rows({{-1, 0}, {1, 0}, {-1, 0}, {1, 0}})).sigma_h, 1.0);
  const auto zero = pooled_sigma(rows({{0, 0}, {0, 0}}));
  EXPECT_EQ(zero.sigma_h, 0.0);
  EXPECT_EQ(zero.sigma_alpha, 0.0);
  EXPECT_NEAR(pooled_sigma(rows({{-2, 0}, {0, 0}, {2, 0}})).sigma_h, std::sqrt(8.0 / 3.0), 1e-12);
  EXPECT_THROW(pooled_sigma(rows({{1, 1}})), Error);
}

TEST(PooledSigma, RecoversNormalSigma) {
  std::mt19937_64 rng(43);
  std::normal_distribution<double> h(0.0, 1.48), a(0.0, 0.20);
  std::vector<std::pair<double, double>> eps(10000);
  for (auto& e : eps) e = {h(rng), a(rng)};
  const auto s = pooled_sigma(rows(eps));
  EXPECT_NEAR(s.sigma_h / 1.48, 1.0, 0.03);
  EXPECT_NEAR(s.sigma_alpha / 0.20, 1.0, 0.03);
}

TEST(AcceptanceRange, IntervalArithmetic) {
  const auto r = make_acceptance_range(1.48, 0.20, 2.5, 0.95);
  EXPECT_NEAR(r.delta_h, 3.70, 1e-9);
  EXPECT_NEAR(r.delta_alpha, 0.50, 1e-9);
  EXPECT_LT(r.delta_h / 576.0, 0.007);
}

TEST(CalibrateU, AllZero) {
  const auto r = calibrate_u(rows({{0, 0}, {0, 0}, {0, 0}}), 0.0, 0.0, 0.95);
  EXPECT_EQ(r.u, 0.0);
  EXPECT_EQ(r.delta_h, 0.0);
  EXPECT_EQ(r.delta_alpha, 0.0);
}

TEST(CalibrateU, NineteenOfTwenty) {
  std::vector<std::pair<double, double>> eps(19, {2.0, -0.4});
  eps.push_back({3.0, 0.6});
  const auto t = rows(eps);
  const auto r = calibrate_u(t, 1.0, 0.2, 0.95);
  EXPECT_EQ(r.u, 2.0);
  EXPECT_EQ(r.delta_h, 2.0);
  EXPECT_EQ(coverage_at(t, 1.0, 0.2, 2.0), 0.95);
  EXPECT_LT(coverage_at(t, 1.0, 0.2, 1.9), 0.95);
  EXPECT_EQ(coverage_at(t, 1.0, 0.2, 3.0), 1.0);
}

TEST(CalibrateU, JointVsPerParameter) {
  // Height and angle outliers sit on different rows, so each parameter alone
  // reaches 90% at u = 1 but jointly it needs u = 5.
  std::vector<std::pair<double, double>> eps(8, {1.0, 1.0});
  eps.push_back({5.0, 0.0});
  eps.push_back({0.0, 5.0});
  const auto t = rows(eps);
  EXPECT_EQ(calibrate_u(t, 1.0, 1.0, 0.9, {0.1, true}).u, 5.0);
  EXPECT_EQ(calibrate_u(t, 1.0, 1.0, 0.9, {0.1, false}).u, 1.0);
  EXPECT_EQ(coverage_at(t, 1.0, 1.0, 1.0, Parameter::kHeight), 0.9);
}

TEST(CalibrateU, MinimalGridPointProperty) {
  std::mt19937_64 rng(44);
  std::normal_distribution<double> h(0.0, 1.5), a(0.0, 0.2);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::pair<double, double>> eps(50 + trial * 10);
    for (auto& e : eps) e = {h(rng), a(rng)};
    const auto t = rows(eps);
    const auto s = pooled_sigma(t);
    const auto r = calibrate_u(t, s.sigma_h, s.sigma_alpha, 0.95);
    ASSERT_GE(coverage_at(t, s.sigma_h, s.sigma_alpha, r.u), 0.95);
    if (r.u > 0) ASSERT_LT(coverage_at(t, s.sigma_h, s.sigma_alpha, r.u - 0.1 + 1e-12), 0.95);
    double prev = 0.0;
    for (int k = 0; k <= 60; ++k) {
      const double c = coverage_at(t, s.sigma_h, s.sigma_alpha, grid_value(k, 0.1));
      ASSERT_GE(c, prev);
      prev = c;
    }
  }
}

TEST(CalibrateU, Errors) {
  EXPECT_EQ(code_of([] { calibrate_u({}, 1, 1, 0.95); }), ErrorCode::kEmptyDataset);
  EXPECT_THROW(calibrate_u(rows({{1, 1}}), 1, 1, 1.0), Error);
  EXPECT_THROW(calibrate_u(rows({{1, 1}}), 1, 1, 0.95, {0.0, true}), Error);
}

TEST(GridValue, DecimalSteps) {
  EXPECT_EQ(grid_value(25, 0.1), 2.5);
  EXPECT_EQ(grid_value(3, 0.1), 0.3);
  EXPECT_EQ(grid_value(7, 0.05), 0.35);
}

TEST(AcceptanceCheck, Examples) {
  const auto range = make_acceptance_range(1.48, 0.20, 2.5, 0.95);
  const GroundTruthLine gt{"i", 300, 0, 512, 3};
  auto r = acceptance_check({302, 0.3, 512}, gt, range);
  EXPECT_TRUE(r.accepted);
  EXPECT_EQ(r.eps_h, 2.0);
  EXPECT_NEAR(r.eps_alpha, 0.3, 1e-15);

  r = acceptance_check({300, 0, 512}, gt, range);
  EXPECT_TRUE(r.accepted);
  EXPECT_EQ(r.eps_h, 0.0);
  EXPECT_EQ(r.eps_alpha, 0.0);

  r = acceptance_check({304, 0.1, 512}, gt, range);
  EXPECT_FALSE(r.h_ok);
  EXPECT_TRUE(r.alpha_ok);
  EXPECT_FALSE(r.accepted);

  EXPECT_THROW(acceptance_check({300, 0, 500}, gt, range), Error);
}

TEST(AcceptanceCheck, Properties) {
  std::mt19937_64 rng(45);
  std::uniform_real_distribution<double> h(290, 310), a(-1, 1);
  const auto range = make_acceptance_range(1.48, 0.20, 2.5, 0.95);
  for (int trial = 0; trial < 500; ++trial) {
    const WaterlineParams p{h(rng), a(rng), 512}, q{h(rng), a(rng), 512};
    const auto r = acceptance_check(p, {"i", q.h, q.alpha, 512, 1}, range);
    const auto s = acceptance_check(q, {"i", p.h, p.alpha, 512, 1}, range);
    ASSERT_EQ(r.accepted, r.h_ok && r.alpha_ok);
    ASSERT_EQ(r.accepted, s.accepted);
    ASSERT_EQ(r.eps_h, s.eps_h);
    ASSERT_GE(r.eps_h, 0.0);
  }
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> v{4, 1, 3, 2};
  EXPECT_EQ(quantile(v, 0.5), 2.5);
  EXPECT_EQ(quantile(v, 0.25), 1.75);
  EXPECT_EQ(quantile(v, 0.75), 3.25);
  EXPECT_EQ(quantile({7}, 0.25), 7.0);
  const auto q = quartiles(std::vector<double>{1, 2, 3, 4, 5});
  EXPECT_EQ(q.q1, 2.0);
  EXPECT_EQ(q.median, 3.0);
  EXPECT_EQ(q.q3, 4.0);
  EXPECT_THROW(quantile({}, 0.5), Error);
}

std::vector<AnnotationRecord> consensus_set(int n) {
  std::vector<AnnotationRecord> r;
  for (int i = 0; i < n; ++i) {
    const std::string id = "img" + std::to_string(i);
    r.push_back(ann(id, "a", 300 + i - 0.5, 0.1));
    r.push_back(ann(id, "b", 300 + i + 0.5, -0.1));
  }
  return r;
}

TEST(StudyReport, AllMatch) {
  const auto r = consensus_set(4);
  std::vector<PredictionRecord> p;
  for (int i = 0; i < 4; ++i) p.push_back({"img" + std::to_string(i), {300.0 + i, 0, 512}, {}, 0.9});
  const auto rep = study_report(r, p, make_acceptance_range(1.48, 0.2, 2.5, 0.95));
  EXPECT_EQ(rep.n_images, 4u);
  EXPECT_EQ(rep.h_rate, 1.0);
  EXPECT_EQ(rep.alpha_rate, 1.0);
  EXPECT_EQ(rep.joint_rate, 1.0);
  EXPECT_EQ(rep.errors.at("all").count, 4u);
}

TEST(StudyReport, OneOutsideHeightOnly) {
  const auto r = consensus_set(2);
  std::vector<PredictionRecord> p{{"img0", {300, 0, 512}, Discipline::kCanoe, 0.9},
                                  {"img1", {311, 0.1, 512}, Discipline::kKayak, 0.9}};
  const auto rep = study_report(r, p, make_acceptance_range(1.48, 0.2, 2.5, 0.95));
  EXPECT_EQ(rep.joint_rate, 0.5);
  EXPECT_EQ(rep.h_rate, 0.5);
  EXPECT_EQ(rep.alpha_rate, 1.0);
  EXPECT_EQ(rep.errors.at("canoe").count, 1u);
  EXPECT_EQ(rep.errors.at("kayak").eps_h.median, 10.0);
}

TEST(StudyReport, SeventeenOfTwenty) {
  const auto r = consensus_set(20);
  std::vector<PredictionRecord> p;
  for (int i = 0; i < 20; ++i) {
    const double off = i < 17 ? 1.0 : 8.0;
    p.push_back({"img" + std::to_string(i), {300.0 + i + off, 0.2, 512}, {}, 0.9});
  }
  const auto rep = study_report(r, p, make_acceptance_range(1.48, 0.2, 2.5, 0.95));
  EXPECT_EQ(rep.joint_rate, 17.0 / 20.0);
  EXPECT_NEAR(rep.joint_rate, 0.85, 1e-12);
  EXPECT_EQ(rep.alpha_rate, 1.0);
}

TEST(StudyReport, AlignmentErrors) {
  const auto r = consensus_set(2);
  const auto range = make_acceptance_range(1.48, 0.2, 2.5, 0.95);
  const std::vector<PredictionRecord> missing{{"img0", {300, 0, 512}, {}, 0.9}};
  EXPECT_EQ(code_of([&] { study_report(r, missing, range); }), ErrorCode::kMissingPrediction);
  auto extra = missing;
  extra.push_back({"img1", {300, 0, 512}, {}, 0.9});
  extra.push_back({"img9", {300, 0, 512}, {}, 0.9});
  EXPECT_EQ(code_of([&] { study_report(r, extra, range); }), ErrorCode::kMissingGroundTruth);
}

TEST(Serialization, AnnotationRoundTrip) {
  testing::TempDir dir("stats");
  std::vector<AnnotationRecord> r{ann("i", "a", 301.25, -0.5),
                                  {"i#B", "b", {297, 0.25, 512}, StudyGroup::kB, false, 1700000000}};
  save_annotations(dir / "a.ndjson", r);
  EXPECT_EQ(load_annotations(dir / "a.ndjson"), r);
  const auto j = to_json(r[1]);
  EXPECT_EQ(j["group"], "B");
  EXPECT_TRUE(j["center_x"].is_number_integer());
  EXPECT_FALSE(j["modified"].get<bool>());
}

TEST(Serialization, PredictionsSkipErrors) {
  testing::TempDir dir("pred");
  std::ofstream(dir / "p.ndjson")
      << to_json(PredictionRecord{"x", {300, 0.5, 512}, Discipline::kKayak, 0.8}).dump() << "\n"
      << R"({"image_id": "y", "error": "NoDetection", "message": "none"})" << "\n";
  const auto p = load_predictions(dir / "p.ndjson");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].image_id, "x");
  EXPECT_EQ(p[0].cls, Discipline::kKayak);
  EXPECT_EQ(p[0].params, (WaterlineParams{300, 0.5, 512}));
}

}  // namespace
}  // namespace waterline
