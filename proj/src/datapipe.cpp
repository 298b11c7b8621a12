#include "excl/datapipe.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace excl {

namespace {

void put_u32(std::uint8_t* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

std::string offset_msg(const std::string& origin, std::size_t off, const std::string& what) {
  return origin + ": offset " + std::to_string(off) + ": " + what;
}

}  // namespace

AnnotationSet read_annotations(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read annotation file " + path.string());
  AnnotationSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    AnnotationRecord rec;
    try {
      const auto j = nlohmann::json::parse(line);
      rec.video_id = j.at("video_id").get<std::string>();
      rec.start_sec = j.at("start_sec").get<double>();
      rec.end_sec = j.at("end_sec").get<double>();
      rec.query = j.at("query").get<std::string>();
      rec.id = j.contains("id") ? j.at("id").get<std::string>() : rec.video_id + "#" + std::to_string(lineno);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (rec.end_sec < rec.start_sec || rec.start_sec < 0.0 || tokenize(rec.query).empty()) {
      ++out.skipped;
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

void write_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write annotation file " + path.string());
  for (const auto& r : records) {
    nlohmann::json j;
    j["id"] = r.id;
    j["video_id"] = r.video_id;
    j["start_sec"] = r.start_sec;
    j["end_sec"] = r.end_sec;
    j["query"] = r.query;
    os << j.dump() << '\n';
  }
}

std::vector<std::uint8_t> encode_feature_file(const Matrix<float>& features) {
  if (features.rows() < 1 || features.cols() < 1) throw ShapeError("feature file: T and D must be >= 1");
  std::vector<std::uint8_t> out(kFeatureHeaderBytes + 4 * static_cast<std::size_t>(features.size()));
  std::copy(std::begin(kFeatureMagic), std::end(kFeatureMagic), out.begin());
  put_u32(&out[8], kFeatureVersion);
  put_u32(&out[12], static_cast<std::uint32_t>(features.rows()));
  put_u32(&out[16], static_cast<std::uint32_t>(features.cols()));
  std::size_t off = kFeatureHeaderBytes;
  for (Eigen::Index t = 0; t < features.rows(); ++t)
    for (Eigen::Index d = 0; d < features.cols(); ++d, off += 4)
      put_u32(&out[off], std::bit_cast<std::uint32_t>(features(t, d)));
  return out;
}

Matrix<float> decode_feature_file(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < kFeatureHeaderBytes)
    throw DataError(offset_msg(origin, bytes.size(), "truncated header (" + std::to_string(bytes.size()) + " bytes)"));
  for (std::size_t i = 0; i < 8; ++i)
    if (bytes[i] != static_cast<std::uint8_t>(kFeatureMagic[i])) throw DataError(offset_msg(origin, i, "bad magic"));
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kFeatureVersion)
    throw DataError(offset_msg(origin, 8, "unsupported version " + std::to_string(version)));
  const std::uint32_t frames = get_u32(bytes, 12);
  const std::uint32_t dim = get_u32(bytes, 16);
  if (frames == 0) throw DataError(offset_msg(origin, 12, "zero frames"));
  if (dim == 0) throw DataError(offset_msg(origin, 16, "zero feature dimension"));
  const std::size_t expected = kFeatureHeaderBytes + 4ull * frames * dim;
  if (bytes.size() != expected)
    throw DataError(offset_msg(origin, std::min(bytes.size(), expected),
                               "payload is " + std::to_string(bytes.size() - kFeatureHeaderBytes) +
                                   " bytes, header implies " + std::to_string(expected - kFeatureHeaderBytes)));
  Matrix<float> m(frames, dim);
  std::size_t off = kFeatureHeaderBytes;
  for (std::uint32_t t = 0; t < frames; ++t)
    for (std::uint32_t d = 0; d < dim; ++d, off += 4) m(t, d) = std::bit_cast<float>(get_u32(bytes, off));
  return m;
}

void write_feature_file(const std::filesystem::path& path, const Matrix<float>& features) {
  const auto bytes = encode_feature_file(features);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write feature file " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("short write to feature file " + path.string());
}

Matrix<float> read_feature_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read feature file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_feature_file(bytes, path.string());
}

std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& video_id) {
  return dir / (video_id + ".feat");
}

FeatureMap load_features(const std::filesystem::path& dir, std::span<const AnnotationRecord> records) {
  FeatureMap out;
  std::vector<std::string> missing;
  for (const auto& r : records) {
    if (out.count(r.video_id)) continue;
    const auto p = feature_path(dir, r.video_id);
    if (!std::filesystem::exists(p)) {
      missing.push_back(r.video_id);
      continue;
    }
    out.emplace(r.video_id, read_feature_file(p));
  }
  if (!missing.empty()) {
    std::string msg = "missing feature files in " + dir.string() + " for:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ... (" + std::to_string(missing.size()) + " total)";
    throw DataError(msg);
  }
  return out;
}

SpanTarget make_target(const AnnotationRecord& rec, int frames, double fps) {
  const double duration = frames / fps;
  SpanTarget t;
  t.start_sec = std::clamp(rec.start_sec, 0.0, duration);
  t.end_sec = std::clamp(rec.end_sec, t.start_sec, duration);
  const auto idx = seconds_to_frames(rec.start_sec, rec.end_sec, fps, frames);
  t.start_idx = idx.start;
  t.end_idx = idx.end;
  return t;
}

std::vector<Batch> make_batches(std::span<const AnnotationRecord> records, const FeatureMap& features,
                                const Vocabulary& vocab, std::size_t batch_size, double fps, Rng* shuffle) {
  if (batch_size == 0) throw ShapeError("make_batches: batch size must be positive");
  std::vector<std::string> missing;
  for (const auto& r : records)
    if (!features.count(r.video_id)) missing.push_back(r.video_id);
  if (!missing.empty()) {
    std::string msg = "make_batches: no features for video ids:";
    for (const auto& id : missing) msg += " " + id;
    throw DataError(msg);
  }

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle) shuffle->shuffle(order);

  std::vector<Batch> out;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(order.size(), begin + batch_size);
    Batch b;
    Eigen::Index t_max = 0, dim = 0;
    std::size_t l_max = 0;
    std::vector<std::vector<int>> ids;
    for (std::size_t k = begin; k < end; ++k) {
      const auto& rec = records[order[k]];
      const auto& f = features.at(rec.video_id);
      t_max = std::max(t_max, f.rows());
      if (dim == 0) dim = f.cols();
      if (f.cols() != dim)
        throw DataError("make_batches: feature dim " + std::to_string(f.cols()) + " of " + rec.video_id +
                        " differs from " + std::to_string(dim));
      auto tok = vocab.encode(rec.query);
      if (tok.empty()) tok.push_back(Vocabulary::kUnk);
      l_max = std::max(l_max, tok.size());
      ids.push_back(std::move(tok));
    }
    for (std::size_t k = begin; k < end; ++k) {
      const auto& rec = records[order[k]];
      const auto& f = features.at(rec.video_id);
      Matrix<float> padded = Matrix<float>::Zero(t_max, dim);
      padded.topRows(f.rows()) = f;
      b.features.push_back(std::move(padded));
      b.frame_masks.push_back(prefix_mask(t_max, f.rows()));
      b.lengths.push_back(static_cast<int>(f.rows()));
      auto tok = ids[k - begin];
      b.token_masks.push_back(prefix_mask(static_cast<Eigen::Index>(l_max), static_cast<Eigen::Index>(tok.size())));
      tok.resize(l_max, Vocabulary::kPad);
      b.token_ids.push_back(std::move(tok));
      b.targets.push_back(make_target(rec, static_cast<int>(f.rows()), fps));
      b.record_index.push_back(order[k]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw ShapeError("synth config: " + m); };
  if (num_items < 1) fail("num_items must be >= 1");
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (min_frames < 4) fail("min_frames must be >= 4");
  if (max_frames < min_frames) fail("max_frames must be >= min_frames");
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!(min_span_frac > 0.0 && min_span_frac <= max_span_frac && max_span_frac <= 1.0))
    fail("span fractions must satisfy 0 < min <= max <= 1");
  if (distractors < 0) fail("distractors must be >= 0");
  if (end_rank < 1) fail("end_rank must be >= 1");
  if (mode == SynthMode::temporal_context && min_frames < 2 * end_rank + 1)
    fail("temporal-context mode needs min_frames >= 2 * end_rank + 1");
  if (!(fps > 0.0)) fail("fps must be positive");
}

std::string synth_class_name(int k) {
  static const char* names[] = {"alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
                                "india", "juliet", "kilo", "lima", "mike", "november", "oscar", "papa"};
  if (k >= 0 && k < 16) return names[k];
  return "class" + std::to_string(k);
}

namespace {
Vector<double> random_unit(Rng& rng, int dim) {
  Vector<double> v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  const double n = v.norm();
  if (n == 0.0) v(0) = 1.0;
  else v /= n;
  return v;
}
}  // namespace

SyntheticDataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SyntheticDataset ds;
  Rng pattern_rng(cfg.seed ^ 0x5eed5eedULL);
  for (int k = 0; k < cfg.num_classes; ++k) ds.patterns.push_back(random_unit(pattern_rng, cfg.feature_dim));
  const Vector<double> marker = random_unit(pattern_rng, cfg.feature_dim);

  Rng rng(cfg.seed);
  const bool temporal = cfg.mode == SynthMode::temporal_context;
  for (int n = 0; n < cfg.num_items; ++n) {
    const int frames = static_cast<int>(rng.uniform_int(cfg.min_frames, cfg.max_frames));
    const int cls = static_cast<int>(rng.uniform_int(0, cfg.num_classes - 1));
    const double frac = rng.uniform(cfg.min_span_frac, cfg.max_span_frac);
    const int min_len = temporal ? 2 * cfg.end_rank + 1 : 1;
    const int len = std::clamp(static_cast<int>(std::lround(frac * frames)), min_len, frames);
    const int s = static_cast<int>(rng.uniform_int(0, frames - len));
    const int e = s + len - 1;

    Matrix<double> x(frames, cfg.feature_dim);
    for (int t = 0; t < frames; ++t)
      for (int d = 0; d < cfg.feature_dim; ++d) x(t, d) = cfg.noise_sigma * rng.normal();

    const auto& u = ds.patterns[static_cast<std::size_t>(cls)];
    if (!temporal) {
      for (int t = s; t <= e; ++t) x.row(t) += u.transpose();
    } else {
      x.row(s) += u.transpose();
      x.row(e) += marker.transpose();
      // every wrong marker is an IoU < 0.5 answer: early inside, far after
      std::vector<int> inside;
      for (int t = s + 1; 2 * (t - s + 1) < len; ++t) inside.push_back(t);
      rng.shuffle(inside);
      for (int i = 0; i + 1 < cfg.end_rank; ++i) x.row(inside[static_cast<std::size_t>(i)]) += marker.transpose();
      std::vector<int> after;
      for (int t = s + 2 * len; t < frames; ++t) after.push_back(t);
      rng.shuffle(after);
      const std::size_t n_extra = std::min<std::size_t>(after.size(), static_cast<std::size_t>(cfg.distractors));
      for (std::size_t i = 0; i < n_extra; ++i) x.row(after[i]) += marker.transpose();
    }

    std::ostringstream id;
    id << "synth-" << std::setw(6) << std::setfill('0') << n;
    AnnotationRecord rec;
    rec.id = id.str();
    rec.video_id = rec.id;
    const Interval secs = frames_to_seconds(s, e, cfg.fps);
    rec.start_sec = secs.start;
    rec.end_sec = secs.end;
    rec.query = "person performs " + synth_class_name(cls) + " activity";
    ds.features.emplace(rec.video_id, x.cast<float>());
    ds.records.push_back(std::move(rec));
    ds.classes.push_back(cls);
    ds.spans.push_back({s, e});
  }
  return ds;
}

}  // namespace excl
