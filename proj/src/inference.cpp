#include "excl/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace excl {

Interval frames_to_seconds(int start, int end, double fps) {
  if (start > end)
    throw ShapeError("frames_to_seconds: start " + std::to_string(start) + " > end " + std::to_string(end));
  if (!(fps > 0.0)) throw ShapeError("frames_to_seconds: fps must be positive");
  return {start / fps, (end + 1) / fps};
}

SpanIndices seconds_to_frames(double start_sec, double end_sec, double fps, int frames) {
  if (end_sec < start_sec)
    throw DataError("seconds_to_frames: end " + std::to_string(end_sec) + " < start " + std::to_string(start_sec));
  if (frames < 1) throw ShapeError("seconds_to_frames: clip has no frames");
  if (!(fps > 0.0)) throw ShapeError("seconds_to_frames: fps must be positive");
  // 1e-9 frame slack absorbs representation error from seconds = frame / fps
  const double s_raw = std::floor(start_sec * fps + 1e-9);
  const int s = static_cast<int>(std::clamp(s_raw, 0.0, static_cast<double>(frames - 1)));
  const double e_raw = std::ceil(end_sec * fps - 1e-9) - 1.0;
  const int e = static_cast<int>(std::clamp(e_raw, static_cast<double>(s), static_cast<double>(frames - 1)));
  return {s, e};
}

double temporal_iou(const Interval& a, const Interval& b) {
  if (!(a.end >= a.start) || !(b.end >= b.start))
    throw ShapeError("temporal_iou: malformed interval (end < start)");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  if (uni <= 0.0) return (a.start == b.start && a.end == b.end) ? 1.0 : 0.0;
  return inter / uni;
}

void EvalConfig::validate() const {
  if (thresholds.empty()) throw ShapeError("eval: no IoU thresholds");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] <= 1.0))
      throw ShapeError("eval: threshold " + std::to_string(thresholds[i]) + " outside (0,1]");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      throw ShapeError("eval: thresholds must be strictly increasing");
  }
  if (!(fps > 0.0)) throw ShapeError("eval: fps must be positive");
}

std::vector<double> recall_at_1(std::span<const Interval> predictions, std::span<const Interval> ground_truths,
                                const EvalConfig& cfg) {
  cfg.validate();
  if (predictions.size() != ground_truths.size())
    throw ShapeError("recall_at_1: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(ground_truths.size()) + " ground truths");
  if (predictions.empty()) throw ShapeError("recall_at_1: empty evaluation set");
  std::vector<std::size_t> hits(cfg.thresholds.size(), 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double iou = temporal_iou(predictions[i], ground_truths[i]);
    for (std::size_t k = 0; k < cfg.thresholds.size(); ++k)
      if (iou >= cfg.thresholds[k]) ++hits[k];
  }
  std::vector<double> out;
  for (auto h : hits) out.push_back(100.0 * static_cast<double>(h) / static_cast<double>(predictions.size()));
  return out;
}

namespace {

std::string fmt_threshold(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

std::string fmt_cell(const std::optional<double>& v) {
  if (!v) return "--";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

std::string rstrip(std::string s) {
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

std::string emit_results_table(std::span<const ResultsRow> rows, std::span<const std::string> datasets,
                               std::span<const double> thresholds) {
  const std::size_t nt = thresholds.size();
  std::vector<std::vector<std::vector<std::string>>> text(rows.size());  // row, dataset, threshold
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& ds : datasets) {
      std::vector<std::string> cells;
      auto it = rows[r].cells.find(ds);
      for (std::size_t k = 0; k < nt; ++k) {
        std::optional<double> v;
        if (it != rows[r].cells.end() && k < it->second.size()) v = it->second[k];
        cells.push_back(fmt_cell(v));
      }
      text[r].push_back(std::move(cells));
    }
  }

  std::size_t label_w = 3;  // "IoU"
  for (const auto& row : rows) label_w = std::max(label_w, row.label.size());

  // widths[d][k]
  std::vector<std::vector<std::size_t>> widths(datasets.size(), std::vector<std::size_t>(nt, 0));
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (std::size_t k = 0; k < nt; ++k) {
      std::size_t w = fmt_threshold(thresholds[k]).size();
      for (std::size_t r = 0; r < rows.size(); ++r) w = std::max(w, text[r][d][k].size());
      widths[d][k] = w;
    }
    std::size_t inner = nt == 0 ? 0 : nt - 1;
    for (auto w : widths[d]) inner += w;
    if (datasets[d].size() > inner && nt > 0) widths[d][0] += datasets[d].size() - inner;
  }
  auto group_width = [&](std::size_t d) {
    std::size_t inner = nt == 0 ? 0 : nt - 1;
    for (auto w : widths[d]) inner += w;
    return std::max(inner, datasets[d].size());
  };

  std::ostringstream os;
  std::string line = pad_right("", label_w);
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const std::size_t gw = group_width(d);
    const std::size_t left = (gw - datasets[d].size()) / 2;
    line += " | " + pad_right(std::string(left, ' ') + datasets[d], gw);
  }
  os << rstrip(line) << '\n';

  line = pad_right("IoU", label_w);
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    line += " |";
    for (std::size_t k = 0; k < nt; ++k) line += " " + pad_left(fmt_threshold(thresholds[k]), widths[d][k]);
  }
  os << rstrip(line) << '\n';

  line = std::string(label_w + 1, '-');
  for (std::size_t d = 0; d < datasets.size(); ++d) line += "+" + std::string(group_width(d) + 2, '-');
  os << line << '\n';

  for (std::size_t r = 0; r < rows.size(); ++r) {
    line = pad_right(rows[r].label, label_w);
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      line += " |";
      for (std::size_t k = 0; k < nt; ++k) line += " " + pad_left(text[r][d][k], widths[d][k]);
    }
    os << rstrip(line) << '\n';
  }
  return os.str();
}

std::string variant_label(bool regression, bool video_lstm, char predictor) {
  std::string s = regression ? "ExCL-reg " : "ExCL-clf ";
  s += video_lstm ? '2' : '1';
  s += '-';
  s += predictor;
  return s;
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRecord> preds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write predictions file " + path.string());
  for (const auto& p : preds) {
    nlohmann::json j;
    j["id"] = p.id;
    j["start_sec"] = p.start_sec;
    j["end_sec"] = p.end_sec;
    os << j.dump() << '\n';
  }
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read predictions file " + path.string());
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("start_sec").get<double>(), j.at("end_sec").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace excl
