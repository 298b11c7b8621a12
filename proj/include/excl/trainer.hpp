#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "excl/checkpoint.hpp"

namespace excl {

struct Dataset {
  std::vector<AnnotationRecord> records;
  FeatureMap features;
};

/// Reads annotations and the matching feature files.
Dataset load_dataset(const std::filesystem::path& annotations, const std::filesystem::path& feature_dir);

struct EvalResult {
  std::vector<double> recall;  // percent, one per threshold
  std::vector<PredictionRecord> predictions;
  std::vector<Interval> ground_truth;
};

/// Eval-mode predictions and R@1 for every record. Throws DataError on an
/// empty dataset or when the features do not match the model.
template <typename Scalar>
EvalResult evaluate(const ExclModel<Scalar>& model, const Vocabulary& vocab, const Dataset& data,
                    const EvalConfig& cfg);

extern template EvalResult evaluate(const ExclModel<float>&, const Vocabulary&, const Dataset&, const EvalConfig&);

struct EpochRecord {
  int epoch = 0;
  std::optional<double> loss;  // absent for the untrained epoch 0
  std::vector<double> recall;  // validation, one per threshold
  bool improved = false;
};

/// {"epoch":..,"loss":..,"recall":{"0.3":..},"best":..} on one line.
std::string epoch_log_line(const EpochRecord& rec, const std::vector<double>& thresholds);

struct TrainOptions {
  std::filesystem::path out_dir;        // best.ckpt and metrics.jsonl; empty = no files
  std::ostream* progress = nullptr;     // human-readable per-epoch lines
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  std::vector<std::string> log;  // the JSON lines, also written to metrics.jsonl
};

/// Epoch 0 is an evaluation of the initial weights. Every later epoch is one
/// pass over shuffled training batches followed by validation; the best
/// epoch by R@1 at early_stop_iou is kept, and training stops once `patience`
/// epochs in a row fail to improve on it.
TrainResult train_model(const RunConfig& cfg, const Dataset& train, const Dataset& val,
                        const TrainOptions& opts = {});

/// Rebuilds the model held in a checkpoint.
ExclModel<float> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace excl
