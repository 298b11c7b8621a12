#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "excl/tensor.hpp"

namespace excl {

struct SpanIndices {
  int start = 0;
  int end = 0;
  bool operator==(const SpanIndices&) const = default;
};

/// Closed time interval in seconds.
struct Interval {
  double start = 0.0;
  double end = 0.0;
};

namespace detail {
inline void check_decode_args(Eigen::Index a, Eigen::Index b, const FrameMask& mask) {
  if (a != b || mask.size() != a) throw ShapeError("decode_span: score/mask lengths disagree");
  if (!mask.any()) throw ShapeError("decode_span: empty mask");
}
}  // namespace detail

/// argmax over valid pairs s <= e of S_start(s) + S_end(e), ties broken by
/// smallest s then smallest e. O(T) using suffix maxima of S_end.
template <typename D1, typename D2>
SpanIndices decode_span(const Eigen::MatrixBase<D1>& s_start, const Eigen::MatrixBase<D2>& s_end,
                        const FrameMask& mask) {
  using Scalar = typename D1::Scalar;
  const Eigen::Index n = s_start.size();
  detail::check_decode_args(n, s_end.size(), mask);
  // best_end[s]: smallest index attaining max S_end over valid e >= s
  std::vector<Eigen::Index> best_end(static_cast<std::size_t>(n), -1);
  Eigen::Index best = -1;
  for (Eigen::Index e = n - 1; e >= 0; --e) {
    if (mask(e) && (best < 0 || s_end(e) >= s_end(best))) best = e;
    best_end[static_cast<std::size_t>(e)] = best;
  }
  SpanIndices out{-1, -1};
  Scalar top = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index s = 0; s < n; ++s) {
    if (!mask(s)) continue;
    const Eigen::Index e = best_end[static_cast<std::size_t>(s)];
    const Scalar v = s_start(s) + s_end(e);
    if (out.start < 0 || v > top) {
      top = v;
      out = {static_cast<int>(s), static_cast<int>(e)};
    }
  }
  return out;
}

/// Exhaustive O(T^2) reference for decode_span with the same tie rule.
template <typename D1, typename D2>
SpanIndices decode_span_bruteforce(const Eigen::MatrixBase<D1>& s_start, const Eigen::MatrixBase<D2>& s_end,
                                   const FrameMask& mask) {
  using Scalar = typename D1::Scalar;
  const Eigen::Index n = s_start.size();
  detail::check_decode_args(n, s_end.size(), mask);
  SpanIndices out{-1, -1};
  Scalar top = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index s = 0; s < n; ++s) {
    if (!mask(s)) continue;
    for (Eigen::Index e = s; e < n; ++e) {
      if (!mask(e)) continue;
      const Scalar v = s_start(s) + s_end(e);
      if (out.start < 0 || v > top) {
        top = v;
        out = {static_cast<int>(s), static_cast<int>(e)};
      }
    }
  }
  return out;
}

/// Frame t covers [t/fps, (t+1)/fps).
Interval frames_to_seconds(int start, int end, double fps);

/// s = clamp(floor(start*fps), 0, T-1), e = clamp(ceil(end*fps) - 1, s, T-1).
SpanIndices seconds_to_frames(double start_sec, double end_sec, double fps, int frames);

/// |a ∩ b| / |a ∪ b|. Two identical zero-length intervals give 1.
double temporal_iou(const Interval& a, const Interval& b);

struct EvalConfig {
  std::vector<double> thresholds{0.3, 0.5, 0.7};
  double fps = 5.0;

  void validate() const;
};

/// Percentage of pairs with IoU >= threshold, one value per threshold.
std::vector<double> recall_at_1(std::span<const Interval> predictions, std::span<const Interval> ground_truths,
                                const EvalConfig& cfg);

/// One model row of the results table; cells[dataset][k] is the accuracy
/// at thresholds[k], std::nullopt renders as "--".
struct ResultsRow {
  std::string label;
  std::map<std::string, std::vector<std::optional<double>>> cells;
};

/// Aligned plain-text table: one column group per dataset, one column per
/// threshold, one decimal place.
std::string emit_results_table(std::span<const ResultsRow> rows, std::span<const std::string> datasets,
                               std::span<const double> thresholds);

/// "ExCL-clf 2-b" style label.
std::string variant_label(bool regression, bool video_lstm, char predictor);

struct PredictionRecord {
  std::string id;
  double start_sec = 0.0;
  double end_sec = 0.0;
};

/// JSON lines: {"id": ..., "start_sec": ..., "end_sec": ...}
void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> preds);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

}  // namespace excl
