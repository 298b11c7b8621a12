#include "excl/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace excl {

Dataset load_dataset(const std::filesystem::path& annotations, const std::filesystem::path& feature_dir) {
  Dataset d;
  d.records = read_annotations(annotations).records;
  d.features = load_features(feature_dir, d.records);
  return d;
}

template <typename Scalar>
EvalResult evaluate(const ExclModel<Scalar>& model, const Vocabulary& vocab, const Dataset& data,
                    const EvalConfig& cfg) {
  cfg.validate();
  if (data.records.empty()) throw DataError("evaluate: empty dataset");
  EvalResult out;
  std::vector<Interval> preds;
  for (const auto& rec : data.records) {
    const auto it = data.features.find(rec.video_id);
    if (it == data.features.end()) throw DataError("evaluate: no features for video " + rec.video_id);
    const Matrix<float>& feats = it->second;
    if (feats.cols() != model.spec().feature_dim)
      throw DataError("evaluate: video " + rec.video_id + " has " + std::to_string(feats.cols()) +
                      "-d features, model expects " + std::to_string(model.spec().feature_dim));
    const int frames = static_cast<int>(feats.rows());
    const SpanTarget target = make_target(rec, frames, cfg.fps);
    const auto tokens = vocab.encode(rec.query);
    const ModelPrediction p = model.predict(feats, tokens, cfg.fps);
    out.predictions.push_back({rec.id, p.seconds.start, p.seconds.end});
    preds.push_back(p.seconds);
    out.ground_truth.push_back({target.start_sec, target.end_sec});
  }
  out.recall = recall_at_1(preds, out.ground_truth, cfg);
  return out;
}

template EvalResult evaluate(const ExclModel<float>&, const Vocabulary&, const Dataset&, const EvalConfig&);

std::string epoch_log_line(const EpochRecord& rec, const std::vector<double>& thresholds) {
  nlohmann::ordered_json j;
  j["epoch"] = rec.epoch;
  j["loss"] = rec.loss ? nlohmann::ordered_json(*rec.loss) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json r;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    std::ostringstream key;
    key << thresholds[i];
    r[key.str()] = rec.recall.at(i);
  }
  j["recall"] = r;
  j["best"] = rec.improved;
  return j.dump();
}

ExclModel<float> model_from_checkpoint(const Checkpoint& ckpt) {
  return ExclModel<float>(ckpt.spec, ckpt.params.cast<float>());
}

namespace {

std::vector<std::string> queries_of(const std::vector<AnnotationRecord>& records) {
  std::vector<std::string> q;
  q.reserve(records.size());
  for (const auto& r : records) q.push_back(r.query);
  return q;
}

int feature_dim_of(const Dataset& d, const char* what) {
  if (d.records.empty()) throw DataError(std::string("train: empty ") + what + " set");
  int dim = -1;
  for (const auto& r : d.records) {
    const auto it = d.features.find(r.video_id);
    if (it == d.features.end()) throw DataError(std::string("train: no features for video ") + r.video_id);
    const int c = static_cast<int>(it->second.cols());
    if (dim >= 0 && c != dim)
      throw DataError(std::string("train: mixed feature dims in ") + what + " set (" + std::to_string(dim) +
                      " and " + std::to_string(c) + ")");
    dim = c;
  }
  return dim;
}

}  // namespace

TrainResult train_model(const RunConfig& cfg, const Dataset& train, const Dataset& val, const TrainOptions& opts) {
  cfg.validate();
  const int feature_dim = feature_dim_of(train, "training");
  if (feature_dim_of(val, "validation") != feature_dim)
    throw DataError("train: validation features differ in dimension from training features");

  Rng init(cfg.seed);
  Rng shuffle(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Rng drop_rng(cfg.seed ^ 0xd1b54a32d192ed03ULL);

  const auto corpus = queries_of(train.records);
  const Vocabulary vocab = build_vocab(corpus, static_cast<std::size_t>(cfg.vocab_size));
  const Matrix<double> table = cfg.glove.empty()
                                   ? random_embeddings(vocab, cfg.embedding_dim, init)
                                   : load_glove(cfg.glove, vocab, cfg.embedding_dim, init);
  const ModelSpec spec = cfg.model_spec(static_cast<int>(vocab.size()), feature_dim);
  ExclModel<float> model(spec, init, &table);
  AdamState<float> adam(model.params(), cfg.adam);
  const EvalConfig eval_cfg = cfg.eval_config();
  std::size_t stop_col = 0;
  while (cfg.thresholds[stop_col] != cfg.early_stop_iou) ++stop_col;

  std::ofstream log_file;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    log_file.open(opts.out_dir / "metrics.jsonl", std::ios::trunc);
    if (!log_file) throw DataError("train: cannot write " + (opts.out_dir / "metrics.jsonl").string());
  }

  TrainResult result;
  auto snapshot = [&](int epoch, double metric) {
    result.best.config = cfg;
    result.best.spec = spec;
    result.best.vocab = vocab;
    result.best.params = model.params().cast<float>();
    result.best.adam = adam;
    result.best.epoch = epoch;
    result.best.best_metric = metric;
    if (!opts.out_dir.empty()) save_checkpoint(opts.out_dir / "best.ckpt", result.best);
  };
  auto record = [&](EpochRecord rec, double seconds) {
    const std::string line = epoch_log_line(rec, cfg.thresholds);
    result.log.push_back(line);
    if (log_file) log_file << line << '\n' << std::flush;
    if (opts.progress) {
      *opts.progress << "epoch " << rec.epoch;
      if (rec.loss) *opts.progress << " loss " << std::fixed << std::setprecision(4) << *rec.loss;
      for (std::size_t i = 0; i < cfg.thresholds.size(); ++i)
        *opts.progress << std::defaultfloat << " R@1[" << cfg.thresholds[i] << "] " << std::fixed << std::setprecision(1)
                       << rec.recall[i];
      *opts.progress << (rec.improved ? " *" : "") << " (" << std::setprecision(1) << seconds << "s)\n"
                     << std::defaultfloat << std::flush;
    }
    result.history.push_back(std::move(rec));
  };

  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  EpochRecord first;
  first.epoch = 0;
  first.recall = evaluate(model, vocab, val, eval_cfg).recall;
  first.improved = true;
  double best = first.recall[stop_col];
  snapshot(0, best);
  record(first, std::chrono::duration<double>(clock::now() - t0).count());

  int since_best = 0;
  const DropoutSpec drop{cfg.dropout, true, &drop_rng};
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    t0 = clock::now();
    const auto batches = make_batches(train.records, train.features, vocab, static_cast<std::size_t>(cfg.batch_size),
                                      cfg.fps, &shuffle);
    double loss_sum = 0.0;
    std::size_t items = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      try {
        model.params().zero_grad();
        Tape<float> tape;
        const Var<float> loss = model.batch_loss(tape, batches[b], cfg.fps, drop);
        const double value = loss.scalar();
        if (!std::isfinite(value)) throw NumericError("loss is " + std::to_string(value));
        tape.backward(loss);
        adam_step(model.params(), adam);
        loss_sum += value * static_cast<double>(batches[b].size());
        items += batches[b].size();
      } catch (const NumericError& e) {
        throw NumericError("train: epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " + e.what());
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(items);
    rec.recall = evaluate(model, vocab, val, eval_cfg).recall;
    rec.improved = rec.recall[stop_col] > best;
    if (rec.improved) {
      best = rec.recall[stop_col];
      since_best = 0;
      snapshot(epoch, best);
    } else {
      ++since_best;
    }
    record(rec, std::chrono::duration<double>(clock::now() - t0).count());
    if (since_best >= cfg.patience) break;
  }
  return result;
}

}  // namespace excl
