#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "excl/inference.hpp"
#include "excl/objectives.hpp"
#include "excl/rng.hpp"
#include "excl/vocab.hpp"

namespace excl {

struct AnnotationRecord {
  std::string id;  // defaults to "<video_id>#<line>" when the file has none
  std::string video_id;
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::string query;
};

struct AnnotationSet {
  std::vector<AnnotationRecord> records;
  std::size_t skipped = 0;  // end < start or empty query
};

/// JSON lines with keys video_id, start_sec, end_sec, query (and optional id).
AnnotationSet read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, std::span<const AnnotationRecord> records);

// Feature file layout, all little-endian:
//   bytes 0..7   "EXCLFEAT"
//   bytes 8..11  u32 version (= 1)
//   bytes 12..15 u32 T
//   bytes 16..19 u32 D
//   then T*D IEEE-754 float32, row-major.
inline constexpr char kFeatureMagic[8] = {'E', 'X', 'C', 'L', 'F', 'E', 'A', 'T'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 20;

std::vector<std::uint8_t> encode_feature_file(const Matrix<float>& features);
Matrix<float> decode_feature_file(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");
void write_feature_file(const std::filesystem::path& path, const Matrix<float>& features);
Matrix<float> read_feature_file(const std::filesystem::path& path);

using FeatureMap = std::map<std::string, Matrix<float>>;

/// Reads <dir>/<video_id>.feat for every distinct video in `records`.
FeatureMap load_features(const std::filesystem::path& dir, std::span<const AnnotationRecord> records);
std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& video_id);

/// Ground truth for a clip of `frames` frames; seconds are clamped into
/// [0, frames/fps] and indices follow seconds_to_frames.
SpanTarget make_target(const AnnotationRecord& rec, int frames, double fps);

/// Padded minibatch. features[b] is T_max x D with zero rows past the clip.
struct Batch {
  std::vector<Matrix<float>> features;
  std::vector<FrameMask> frame_masks;
  std::vector<int> lengths;
  std::vector<std::vector<int>> token_ids;  // padded with PAD to L_max
  std::vector<FrameMask> token_masks;
  std::vector<SpanTarget> targets;
  std::vector<std::size_t> record_index;

  std::size_t size() const { return features.size(); }
};

/// Groups records into batches (last partial batch kept). With `shuffle`
/// non-null the record order is permuted first.
std::vector<Batch> make_batches(std::span<const AnnotationRecord> records, const FeatureMap& features,
                                const Vocabulary& vocab, std::size_t batch_size, double fps, Rng* shuffle);

enum class SynthMode { pattern, temporal_context };

struct SynthConfig {
  SynthMode mode = SynthMode::pattern;
  int num_items = 2000;
  int num_classes = 8;
  int min_frames = 20;
  int max_frames = 200;
  int feature_dim = 32;
  double noise_sigma = 1.0;
  double min_span_frac = 0.2;
  double max_span_frac = 0.5;
  int end_rank = 3;     // temporal-context only: the span ends on this marker after the start
  int distractors = 3;  // temporal-context only: extra markers after the span
  double fps = 5.0;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticDataset {
  std::vector<AnnotationRecord> records;
  FeatureMap features;
  std::vector<int> classes;        // 0-based class per record
  std::vector<SpanIndices> spans;  // ground-truth frames per record
  std::vector<Vector<double>> patterns;  // unit vector per class
};

/// Pattern mode: class pattern u_k added on every frame of the span.
/// Temporal-context mode: u_k marks only the first span frame and the span
/// ends on the end_rank-th frame after it carrying the shared marker w.
/// The other w frames sit in the first half of the span or more than a span
/// length past its end, so finding the end means counting markers since the
/// start.
SyntheticDataset generate_synthetic(const SynthConfig& cfg);

std::string synth_class_name(int k);

}  // namespace excl
