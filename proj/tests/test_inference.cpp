#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "excl/inference.hpp"
#include "excl/rng.hpp"
#include "table1.hpp"

using namespace excl;
using Vec = Vector<double>;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

SpanIndices decode(const Vec& a, const Vec& b) { return decode_span(a, b, full_mask(a.size())); }

}  // namespace

TEST_CASE("span decoding examples") {
  CHECK(decode(vec({3, 0}), vec({0, 3})) == SpanIndices{0, 1});
  CHECK(decode(vec({0, 5}), vec({5, 0})) == SpanIndices{0, 0});
  CHECK(decode(vec({-4.0}), vec({7.0})) == SpanIndices{0, 0});
  CHECK(decode(Vec::Zero(6), Vec::Zero(6)) == SpanIndices{0, 0});
  CHECK(decode_span_bruteforce(Vec::Zero(6), Vec::Zero(6), full_mask(6)) == SpanIndices{0, 0});
  CHECK(decode(vec({0, 1, 0}), vec({2, 0, 2})) == SpanIndices{1, 2});
  CHECK_THROWS_AS(decode_span(Vec::Zero(3), Vec::Zero(3), prefix_mask(3, 0)), ShapeError);
  CHECK_THROWS_AS(decode_span(Vec::Zero(3), Vec::Zero(2), full_mask(3)), ShapeError);
}

TEST_CASE("decoding respects the mask") {
  const Vec a = vec({0, 0, 9, 9});
  const Vec b = vec({0, 1, 9, 9});
  CHECK(decode_span(a, b, prefix_mask(4, 2)) == SpanIndices{0, 1});
  CHECK(decode_span_bruteforce(a, b, prefix_mask(4, 2)) == SpanIndices{0, 1});
}

TEST_CASE("fast decoding equals exhaustive search") {
  Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const Eigen::Index T = rng.uniform_int(1, 60);
    Vec a(T), b(T);
    const bool coarse = trial % 2 == 0;
    for (Eigen::Index t = 0; t < T; ++t) {
      a(t) = coarse ? static_cast<double>(rng.uniform_int(-2, 2)) : rng.normal();
      b(t) = coarse ? static_cast<double>(rng.uniform_int(-2, 2)) : rng.normal();
    }
    const FrameMask mask = prefix_mask(T, rng.uniform_int(1, T));
    const SpanIndices fast = decode_span(a, b, mask);
    const SpanIndices slow = decode_span_bruteforce(a, b, mask);
    REQUIRE(fast == slow);
    CHECK(fast.start <= fast.end);
    CHECK(mask(fast.end));
  }
}

TEST_CASE("frame and time conversion") {
  const Interval a = frames_to_seconds(0, 0, 5.0);
  CHECK(a.start == 0.0);
  CHECK(a.end == doctest::Approx(0.2).epsilon(1e-15));
  const Interval b = frames_to_seconds(5, 9, 5.0);
  CHECK(b.start == 1.0);
  CHECK(b.end == 2.0);
  CHECK_THROWS_AS(frames_to_seconds(3, 2, 5.0), ShapeError);

  CHECK(seconds_to_frames(1.0, 2.0, 5.0, 100) == SpanIndices{5, 9});
  CHECK(seconds_to_frames(0.0, 0.1, 5.0, 100) == SpanIndices{0, 0});
  CHECK(seconds_to_frames(50.0, 60.0, 5.0, 100) == SpanIndices{99, 99});
  CHECK(seconds_to_frames(19.0, 60.0, 5.0, 100) == SpanIndices{95, 99});
  CHECK_THROWS_AS(seconds_to_frames(2.0, 1.0, 5.0, 100), DataError);

  for (double fps : {1.0, 5.0, 7.5, 30.0})
    for (int s = 0; s < 40; s += 3)
      for (int e = s; e < 40; e += 5) {
        const Interval iv = frames_to_seconds(s, e, fps);
        const SpanIndices back = seconds_to_frames(iv.start, iv.end, fps, 40);
        REQUIRE(back == SpanIndices{s, e});
        const Interval again = frames_to_seconds(back.start, back.end, fps);
        CHECK(again.start == iv.start);
        CHECK(again.end == iv.end);
      }
}

TEST_CASE("temporal IoU") {
  CHECK(std::abs(temporal_iou({0, 2}, {1, 3}) - 1.0 / 3.0) < 1e-12);
  CHECK(temporal_iou({1, 4}, {1, 4}) == 1.0);
  CHECK(temporal_iou({0, 1}, {2, 3}) == 0.0);
  CHECK(temporal_iou({0, 1}, {1, 2}) == 0.0);
  CHECK(temporal_iou({2, 2}, {2, 2}) == 1.0);
  CHECK(temporal_iou({2, 2}, {1, 3}) == 0.0);
  CHECK_THROWS_AS(temporal_iou({3, 2}, {1, 3}), ShapeError);

  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    double a0 = rng.uniform(0, 10), a1 = rng.uniform(0, 10), b0 = rng.uniform(0, 10), b1 = rng.uniform(0, 10);
    if (a0 > a1) std::swap(a0, a1);
    if (b0 > b1) std::swap(b0, b1);
    const double x = temporal_iou({a0, a1}, {b0, b1});
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
    CHECK(x == temporal_iou({b0, b1}, {a0, a1}));
  }
}

TEST_CASE("recall at 1") {
  EvalConfig cfg;
  const std::vector<Interval> gt{{0, 2}, {1, 5}};
  CHECK(recall_at_1(gt, gt, cfg) == std::vector<double>{100.0, 100.0, 100.0});

  const std::vector<Interval> half_p{{0, 1}};
  const std::vector<Interval> half_g{{0, 2}};
  CHECK(temporal_iou(half_p[0], half_g[0]) == 0.5);
  CHECK(recall_at_1(half_p, half_g, cfg) == std::vector<double>{100.0, 100.0, 0.0});

  // IoUs 0.4 and 0.8
  const std::vector<Interval> p{{0, 4}, {0, 8}};
  const std::vector<Interval> g{{0, 10}, {0, 10}};
  CHECK(recall_at_1(p, g, cfg) == std::vector<double>{100.0, 50.0, 50.0});

  CHECK_THROWS_AS(recall_at_1(p, half_g, cfg), ShapeError);
  CHECK_THROWS_AS(recall_at_1(std::vector<Interval>{}, std::vector<Interval>{}, cfg), ShapeError);

  EvalConfig bad;
  bad.thresholds = {0.5, 0.3};
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad.thresholds = {0.0, 0.5};
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad.thresholds = {0.5, 1.2};
  CHECK_THROWS_AS(bad.validate(), ShapeError);

  Rng rng(9);
  std::vector<Interval> rp, rg;
  for (int i = 0; i < 200; ++i) {
    const double s = rng.uniform(0, 5);
    rp.push_back({s, s + rng.uniform(0, 5)});
    const double t = rng.uniform(0, 5);
    rg.push_back({t, t + rng.uniform(0.1, 5)});
  }
  EvalConfig fine;
  fine.thresholds = {0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0};
  const auto r = recall_at_1(rp, rg, fine);
  for (std::size_t k = 1; k < r.size(); ++k) CHECK(r[k] <= r[k - 1]);
}

TEST_CASE("results table") {
  const auto rows = fixtures::published_rows();
  const auto datasets = fixtures::published_datasets();
  const std::vector<double> th{0.3, 0.5, 0.7};
  const std::string table = emit_results_table(rows, datasets, th);
  CHECK(table == fixtures::published_table());
  CHECK(table.find("ExCL-clf 2-b | 44.2 28.0 14.6 |") != std::string::npos);
  CHECK(emit_results_table(rows, datasets, th) == table);

  const std::vector<ResultsRow> none;
  const std::string header = emit_results_table(none, datasets, th);
  CHECK(std::count(header.begin(), header.end(), '\n') == 3);
  CHECK(header.find("IoU") != std::string::npos);

  ResultsRow partial;
  partial.label = "ExCL-reg 2-b";
  partial.cells["TACoS"] = {45.5, std::nullopt};
  const std::vector<ResultsRow> one{partial};
  const std::vector<std::string> tacos{"TACoS"};
  const std::string t = emit_results_table(one, tacos, th);
  CHECK(t.find("ExCL-reg 2-b | 45.5  --  --\n") != std::string::npos);
}

TEST_CASE("variant labels") {
  CHECK(variant_label(false, true, 'b') == "ExCL-clf 2-b");
  CHECK(variant_label(true, false, 'a') == "ExCL-reg 1-a");
}

TEST_CASE("predictions file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "excl_preds_rt.jsonl";
  const std::vector<PredictionRecord> preds{{"a#1", 0.0, 0.2}, {"b#2", 1.0 / 3.0, 2.718281828459045}};
  write_predictions(path, preds);
  const auto back = read_predictions(path);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].id == preds[i].id);
    CHECK(back[i].start_sec == preds[i].start_sec);
    CHECK(back[i].end_sec == preds[i].end_sec);
  }
  std::ofstream(path) << "{\"id\": \"x\", \"start_sec\": 1}\n";
  CHECK_THROWS_AS(read_predictions(path), DataError);
}
