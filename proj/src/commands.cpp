#include "excl/commands.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace excl {

SplitRecords split_records(const std::vector<AnnotationRecord>& records, std::uint64_t seed) {
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed ^ 0x53504c4954ULL);
  rng.shuffle(order);
  const std::size_t n_val = records.size() / 10;
  const std::size_t n_test = records.size() / 10;
  const std::size_t n_train = records.size() - n_val - n_test;
  SplitRecords out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& r = records[order[i]];
    if (i < n_train)
      out.train.push_back(r);
    else if (i < n_train + n_val)
      out.val.push_back(r);
    else
      out.test.push_back(r);
  }
  return out;
}

SplitRecords cmd_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  const SyntheticDataset data = generate_synthetic(cfg);
  const auto feat_dir = out_dir / "features";
  std::error_code ec;
  std::filesystem::create_directories(feat_dir, ec);
  if (ec) throw DataError("synth: cannot create " + feat_dir.string() + ": " + ec.message());
  for (const auto& [video, feats] : data.features) write_feature_file(feature_path(feat_dir, video), feats);
  SplitRecords split = split_records(data.records, cfg.seed);
  write_annotations(out_dir / "train.jsonl", split.train);
  write_annotations(out_dir / "val.jsonl", split.val);
  write_annotations(out_dir / "test.jsonl", split.test);
  return split;
}

TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& train_ann,
                      const std::filesystem::path& val_ann, const std::filesystem::path& features,
                      const std::filesystem::path& out_dir, std::ostream* progress) {
  const Dataset train = load_dataset(train_ann, features);
  const Dataset val = load_dataset(val_ann, features);
  TrainOptions opts;
  opts.out_dir = out_dir;
  opts.progress = progress;
  return train_model(cfg, train, val, opts);
}

EvalReport cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& ann,
                    const std::filesystem::path& features, const std::optional<std::vector<double>>& thresholds) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Dataset data = load_dataset(ann, features);
  EvalConfig cfg = ckpt.config.eval_config();
  if (thresholds) cfg.thresholds = *thresholds;
  const ExclModel<float> model = model_from_checkpoint(ckpt);
  EvalReport rep;
  rep.result = evaluate(model, ckpt.vocab, data, cfg);

  const std::string dataset = ann.stem().string();
  ResultsRow row;
  row.label = ckpt.spec.label();
  for (double r : rep.result.recall) row.cells[dataset].push_back(r);
  const std::vector<ResultsRow> rows{row};
  const std::vector<std::string> datasets{dataset};
  rep.table = emit_results_table(rows, datasets, cfg.thresholds);

  nlohmann::ordered_json j;
  j["label"] = row.label;
  j["dataset"] = dataset;
  j["count"] = data.records.size();
  nlohmann::ordered_json r;
  for (std::size_t k = 0; k < cfg.thresholds.size(); ++k) {
    char key[32];
    std::snprintf(key, sizeof key, "%g", cfg.thresholds[k]);
    r[key] = rep.result.recall[k];
  }
  j["recall"] = r;
  rep.json = j.dump();
  return rep;
}

std::vector<PredictionRecord> cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& ann,
                                          const std::filesystem::path& features, const std::filesystem::path& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Dataset data = load_dataset(ann, features);
  const ExclModel<float> model = model_from_checkpoint(ckpt);
  const EvalResult res = evaluate(model, ckpt.vocab, data, ckpt.config.eval_config());
  write_predictions(out, res.predictions);
  return res.predictions;
}

std::vector<double> cmd_score(const std::filesystem::path& predictions, const std::filesystem::path& ann,
                              const std::filesystem::path& features, const EvalConfig& cfg) {
  const Dataset data = load_dataset(ann, features);
  const auto preds = read_predictions(predictions);
  std::map<std::string, Interval> by_id;
  for (const auto& p : preds)
    if (!by_id.emplace(p.id, Interval{p.start_sec, p.end_sec}).second)
      throw DataError("score: duplicate prediction id " + p.id);
  std::vector<Interval> ps, gts;
  for (const auto& rec : data.records) {
    const auto it = by_id.find(rec.id);
    if (it == by_id.end()) throw DataError("score: no prediction for id " + rec.id);
    const int frames = static_cast<int>(data.features.at(rec.video_id).rows());
    const SpanTarget t = make_target(rec, frames, cfg.fps);
    ps.push_back(it->second);
    gts.push_back({t.start_sec, t.end_sec});
  }
  if (ps.empty()) throw DataError("score: empty dataset");
  return recall_at_1(ps, gts, cfg);
}

GradcheckReport make_gradcheck_report(std::vector<GradcheckRow> rows, double tolerance) {
  GradcheckReport rep;
  rep.rows = std::move(rows);
  rep.passed = true;
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %12s %8s  %s\n", "variant", "max_rel_err", "seconds", "status");
  os << line;
  for (const auto& r : rep.rows) {
    const bool ok = r.result.max_rel_error < tolerance;
    rep.passed = rep.passed && ok;
    std::snprintf(line, sizeof line, "%-14s %12.3e %8.2f  %s", r.label.c_str(), r.result.max_rel_error, r.seconds,
                  ok ? "ok" : "FAIL");
    os << line;
    if (!ok) os << " (worst: " << r.result.worst_param << "[" << r.result.worst_index << "])";
    os << '\n';
  }
  os << (rep.passed ? "all variants below " : "some variants at or above ") << tolerance << '\n';
  rep.text = os.str();
  return rep;
}

GradcheckReport cmd_gradcheck(double eps, double tolerance) {
  return make_gradcheck_report(gradcheck_all(eps), tolerance);
}

}  // namespace excl
