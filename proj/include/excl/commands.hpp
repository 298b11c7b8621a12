#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "excl/trainer.hpp"

namespace excl {

struct SplitRecords {
  std::vector<AnnotationRecord> train, val, test;
};

/// Seeded shuffle, then 10% validation, 10% test, the rest training.
SplitRecords split_records(const std::vector<AnnotationRecord>& records, std::uint64_t seed);

/// Writes features/<video_id>.feat plus train/val/test.jsonl under out_dir.
SplitRecords cmd_synth(const SynthConfig& cfg, const std::filesystem::path& out_dir);

TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& train_ann,
                      const std::filesystem::path& val_ann, const std::filesystem::path& features,
                      const std::filesystem::path& out_dir, std::ostream* progress = nullptr);

struct EvalReport {
  std::string table;  // emit_results_table output
  std::string json;   // one-line metrics object
  EvalResult result;
};

/// Thresholds default to those stored in the checkpoint.
EvalReport cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& ann,
                    const std::filesystem::path& features, const std::optional<std::vector<double>>& thresholds = {});

std::vector<PredictionRecord> cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& ann,
                                          const std::filesystem::path& features, const std::filesystem::path& out);

/// R@1 of a predictions file against annotations; ground truth is clamped
/// to each clip's duration exactly as in evaluation.
std::vector<double> cmd_score(const std::filesystem::path& predictions, const std::filesystem::path& ann,
                              const std::filesystem::path& features, const EvalConfig& cfg);

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  bool passed = false;
  std::string text;
};

GradcheckReport cmd_gradcheck(double eps = 1e-4, double tolerance = 1e-3);
GradcheckReport make_gradcheck_report(std::vector<GradcheckRow> rows, double tolerance);

}  // namespace excl
