#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "excl/datapipe.hpp"

using namespace excl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "excl_datapipe" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Matrix<float> random_features(Eigen::Index t, Eigen::Index d, Rng& rng) {
  Matrix<float> m(t, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
  return m;
}

bool bitwise_equal(const Matrix<float>& a, const Matrix<float>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("feature file layout") {
  const auto bytes = encode_feature_file(Matrix<float>::Zero(1, 1));
  REQUIRE(bytes.size() == 24);
  CHECK(std::memcmp(bytes.data(), "EXCLFEAT", 8) == 0);
  CHECK(bytes[8] == 1);
  CHECK(bytes[9] == 0);
  CHECK(bytes[12] == 1);
  CHECK(bytes[16] == 1);
  for (int i = 20; i < 24; ++i) CHECK(bytes[static_cast<std::size_t>(i)] == 0);
  CHECK(bitwise_equal(decode_feature_file(bytes), Matrix<float>::Zero(1, 1)));

  Matrix<float> one(1, 2);
  one << 1.0f, -2.0f;
  const auto b2 = encode_feature_file(one);
  // 1.0f = 0x3f800000, little-endian, row-major
  CHECK(b2[20] == 0x00);
  CHECK(b2[23] == 0x3f);
  CHECK(b2[27] == 0xc0);
}

TEST_CASE("feature file round trip") {
  Rng rng(1);
  const auto dir = scratch("roundtrip");
  for (auto [t, d] : {std::pair{7, 3}, std::pair{1, 5}, std::pair{40, 1}}) {
    Matrix<float> x = random_features(t, d, rng);
    if (t == 7) {
      x(0, 0) = -0.0f;
      x(1, 1) = std::numeric_limits<float>::denorm_min();
      x(2, 2) = std::numeric_limits<float>::max();
    }
    const auto path = dir / ("f" + std::to_string(t) + ".feat");
    write_feature_file(path, x);
    CHECK(fs::file_size(path) == 20 + 4 * static_cast<std::uintmax_t>(t * d));
    CHECK(bitwise_equal(read_feature_file(path), x));
  }
  CHECK_THROWS_AS(encode_feature_file(Matrix<float>(0, 3)), ShapeError);
}

TEST_CASE("feature file corruption") {
  Rng rng(2);
  const auto good = encode_feature_file(random_features(7, 3, rng));

  auto truncated = good;
  truncated.pop_back();
  CHECK_THROWS_WITH_AS(decode_feature_file(truncated), doctest::Contains("offset"), DataError);
  CHECK_THROWS_AS(decode_feature_file(std::span(good).first(10)), DataError);
  auto longer = good;
  longer.push_back(0);
  CHECK_THROWS_AS(decode_feature_file(longer), DataError);

  for (std::size_t i = 0; i < 8; ++i)
    for (int v = 0; v < 256; ++v) {
      if (v == good[i]) continue;
      auto bad = good;
      bad[i] = static_cast<std::uint8_t>(v);
      CHECK_THROWS_WITH_AS(decode_feature_file(bad), doctest::Contains(("offset " + std::to_string(i)).c_str()), DataError);
    }

  auto future = good;
  future[8] = 2;
  CHECK_THROWS_WITH_AS(decode_feature_file(future), doctest::Contains("version"), DataError);
  CHECK_THROWS_AS(read_feature_file("/nonexistent/x.feat"), DataError);
}

TEST_CASE("annotation files") {
  const auto dir = scratch("ann");
  const auto empty = dir / "empty.jsonl";
  std::ofstream(empty).close();
  CHECK(read_annotations(empty).records.empty());

  const auto mixed = dir / "mixed.jsonl";
  std::ofstream(mixed) << R"({"video_id": "v1", "start_sec": 1.0, "end_sec": 2.5, "query": "Open the door."})" << "\n"
                       << R"({"video_id": "v2", "start_sec": 3.0, "end_sec": 2.0, "query": "bad span"})" << "\n"
                       << "\n"
                       << R"({"id": "q9", "video_id": "v2", "start_sec": 0, "end_sec": 0.4, "query": "close it"})"
                       << "\n";
  const auto set = read_annotations(mixed);
  CHECK(set.skipped == 1);
  REQUIRE(set.records.size() == 2);
  CHECK(set.records[0].video_id == "v1");
  CHECK(set.records[0].id == "v1#1");
  CHECK(set.records[0].end_sec == 2.5);
  CHECK(set.records[1].id == "q9");

  const auto out = dir / "out.jsonl";
  write_annotations(out, set.records);
  const auto again = read_annotations(out);
  REQUIRE(again.records.size() == 2);
  CHECK(again.records[1].query == "close it");
  CHECK(again.records[1].id == "q9");

  const auto broken = dir / "broken.jsonl";
  std::ofstream(broken) << R"({"video_id": "v1", "start_sec": 1.0, "end_sec": 2.5, "query": "ok"})" << "\n"
                        << "{not json\n";
  CHECK_THROWS_WITH_AS(read_annotations(broken), doctest::Contains(":2:"), DataError);
}

TEST_CASE("batching") {
  Rng rng(3);
  FeatureMap feats;
  std::vector<AnnotationRecord> recs;
  const int lengths[5] = {6, 9, 4, 12, 7};
  for (int i = 0; i < 5; ++i) {
    const std::string vid = "v" + std::to_string(i);
    feats[vid] = random_features(lengths[i], 3, rng);
    recs.push_back({vid + "#1", vid, 0.2 * i, 0.2 * i + 0.5, i % 2 ? "open the door" : "walk to the door now"});
  }
  const std::vector<std::string> corpus{"open the door", "walk to the door now"};
  const Vocabulary vocab = build_vocab(corpus, 100);

  const auto batches = make_batches(recs, feats, vocab, 2, 5.0, nullptr);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 2);
  CHECK(batches[1].size() == 2);
  CHECK(batches[2].size() == 1);

  for (const auto& b : batches) {
    int tmax = 0;
    for (int len : b.lengths) tmax = std::max(tmax, len);
    for (std::size_t i = 0; i < b.size(); ++i) {
      CHECK(b.features[i].rows() == tmax);
      const int len = b.lengths[i];
      CHECK(b.frame_masks[i].head(len).all());
      CHECK(!b.frame_masks[i].tail(tmax - len).any());
      CHECK(b.features[i].bottomRows(tmax - len).isZero(0.0));
      const auto& src = feats.at(recs[b.record_index[i]].video_id);
      CHECK(bitwise_equal(b.features[i].topRows(len), src));
      CHECK(b.frame_masks[i](b.targets[i].start_idx));
      CHECK(b.frame_masks[i](b.targets[i].end_idx));
      CHECK(b.targets[i].start_idx <= b.targets[i].end_idx);
      const auto n_tok = static_cast<std::size_t>(b.token_masks[i].count());
      for (std::size_t k = n_tok; k < b.token_ids[i].size(); ++k) CHECK(b.token_ids[i][k] == Vocabulary::kPad);
    }
  }
  CHECK(batches[0].token_ids[0].size() == 5);
  CHECK(batches[0].token_masks[1].count() == 3);

  Rng s1(42), s2(42);
  const auto a = make_batches(recs, feats, vocab, 2, 5.0, &s1);
  const auto b = make_batches(recs, feats, vocab, 2, 5.0, &s2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].record_index == b[i].record_index);

  auto missing = recs;
  missing[1].video_id = "ghost";
  CHECK_THROWS_WITH_AS(make_batches(missing, feats, vocab, 2, 5.0, nullptr), doctest::Contains("ghost"), DataError);
}

TEST_CASE("targets beyond the clip are clamped") {
  AnnotationRecord rec{"x", "x", 30.0, 45.0, "q"};
  const SpanTarget t = make_target(rec, 20, 5.0);
  CHECK(t.start_idx == 19);
  CHECK(t.end_idx == 19);
  CHECK(t.start_sec == 4.0);
  CHECK(t.end_sec == 4.0);

  AnnotationRecord inside{"y", "y", 1.0, 2.0, "q"};
  const SpanTarget u = make_target(inside, 100, 5.0);
  CHECK(u.start_idx == 5);
  CHECK(u.end_idx == 9);
  CHECK(u.start_sec == 1.0);
  CHECK(u.end_sec == 2.0);
}

TEST_CASE("synthetic generator") {
  SUBCASE("noise-free single class is solved by thresholding") {
    SynthConfig cfg;
    cfg.num_items = 200;
    cfg.num_classes = 1;
    cfg.noise_sigma = 0.0;
    const auto ds = generate_synthetic(cfg);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      const auto& rec = ds.records[i];
      const auto& x = ds.features.at(rec.video_id);
      int s = -1, e = -1;
      for (Eigen::Index t = 0; t < x.rows(); ++t)
        if (x.row(t).norm() > 0.5f) {
          if (s < 0) s = static_cast<int>(t);
          e = static_cast<int>(t);
        }
      REQUIRE(s >= 0);
      const Interval pred = frames_to_seconds(s, e, cfg.fps);
      const SpanTarget gt = make_target(rec, static_cast<int>(x.rows()), cfg.fps);
      CHECK(temporal_iou(pred, {gt.start_sec, gt.end_sec}) == 1.0);
    }
  }
  SUBCASE("same seed gives the same data") {
    SynthConfig cfg;
    cfg.num_items = 50;
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].query == b.records[i].query);
      CHECK(a.records[i].start_sec == b.records[i].start_sec);
      CHECK(bitwise_equal(a.features.at(a.records[i].video_id), b.features.at(b.records[i].video_id)));
    }
    cfg.seed = 8;
    const auto c = generate_synthetic(cfg);
    CHECK(!bitwise_equal(a.features.at(a.records[0].video_id), c.features.at(c.records[0].video_id)));
  }
  SUBCASE("class balance and span bounds") {
    SynthConfig cfg;
    const auto ds = generate_synthetic(cfg);
    REQUIRE(ds.records.size() == 2000);
    std::vector<int> counts(8, 0);
    for (int k : ds.classes) ++counts[static_cast<std::size_t>(k)];
    for (int c : counts) CHECK(c >= 100);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      const auto& rec = ds.records[i];
      const auto frames = ds.features.at(rec.video_id).rows();
      CHECK(frames >= 20);
      CHECK(frames <= 200);
      CHECK(ds.features.at(rec.video_id).cols() == 32);
      CHECK(rec.start_sec >= 0.0);
      CHECK(rec.end_sec <= static_cast<double>(frames) / cfg.fps + 1e-12);
      CHECK(rec.query.find(synth_class_name(ds.classes[i])) != std::string::npos);
    }
  }
  SUBCASE("temporal-context markers") {
    SynthConfig cfg;
    cfg.mode = SynthMode::temporal_context;
    cfg.num_items = 100;
    cfg.noise_sigma = 0.0;
    const auto ds = generate_synthetic(cfg);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      const auto& x = ds.features.at(ds.records[i].video_id);
      const auto span = ds.spans[i];
      const Vector<float> u = ds.patterns[static_cast<std::size_t>(ds.classes[i])].cast<float>();
      const Vector<float> w = x.row(span.end).transpose();
      std::vector<int> marked;
      for (Eigen::Index t = 0; t < x.rows(); ++t)
        if (x.row(t).norm() > 0.5f) marked.push_back(static_cast<int>(t));
      REQUIRE(marked.size() >= 4);
      CHECK(marked[0] == span.start);
      CHECK(marked[3] == span.end);
      CHECK((x.row(span.start).transpose() - u).norm() < 1e-6f);
      for (int k = 1; k <= 3; ++k)
        CHECK((x.row(marked[static_cast<std::size_t>(k)]).transpose() - w).norm() < 1e-6f);
      const int len = span.end - span.start + 1;
      CHECK(2 * (marked[2] - span.start + 1) < len);
      for (std::size_t k = 4; k < marked.size(); ++k) CHECK(marked[k] - span.start + 1 > 2 * len);
      const auto room = static_cast<std::size_t>(std::max<Eigen::Index>(0, x.rows() - span.start - 2 * len));
      CHECK(marked.size() == 4 + std::min<std::size_t>(room, 3));
    }
  }
  SUBCASE("invalid configs") {
    SynthConfig cfg;
    cfg.min_frames = 3;
    CHECK_THROWS_AS(generate_synthetic(cfg), ShapeError);
    cfg = SynthConfig{};
    cfg.num_classes = 0;
    CHECK_THROWS_AS(generate_synthetic(cfg), ShapeError);
    cfg = SynthConfig{};
    cfg.max_span_frac = 1.5;
    CHECK_THROWS_AS(generate_synthetic(cfg), ShapeError);
    cfg = SynthConfig{};
    cfg.mode = SynthMode::temporal_context;
    cfg.min_frames = 6;
    cfg.max_frames = 10;
    CHECK_THROWS_AS(generate_synthetic(cfg), ShapeError);
  }
}
