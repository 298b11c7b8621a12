#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "excl/datapipe.hpp"
#include "excl/model.hpp"
#include "excl/optim.hpp"

namespace excl {

/// Invalid configuration value or unknown key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Training/evaluation settings. Defaults follow the published setup:
/// batch 32, Adam lr 0.001, dropout 0.5, 30 epochs, 5 fps, hidden sizes
/// 256 (query, video) / 128 (predictor LSTM) / 256 (MLP) per direction.
///
/// Stored as a flat JSON object; every key is optional and unknown keys
/// are rejected.
struct RunConfig {
  Objective objective = Objective::clf;
  bool video_lstm = true;
  PredictorKind predictor = PredictorKind::tied;
  int embedding_dim = 300;
  int query_hidden = 256;
  int video_hidden = 256;
  int predictor_hidden = 128;
  int mlp_hidden = 256;
  int batch_size = 32;
  AdamConfig adam{};
  double dropout = 0.5;
  int max_epochs = 30;
  int patience = 5;
  double early_stop_iou = 0.5;
  std::vector<double> thresholds{0.3, 0.5, 0.7};
  double fps = 5.0;
  int vocab_size = 10000;
  RegLossKind reg_loss = RegLossKind::abs;
  std::uint64_t seed = 1;
  std::string glove;  // optional embedding file

  void validate() const;
  std::string variant() const;  // e.g. "2-b"
  void set_variant(std::string_view v);
  std::string label() const;
  ModelSpec model_spec(int vocab, int feature_dim) const;
  EvalConfig eval_config() const;

  std::string to_json() const;
  static RunConfig from_json(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);
};

/// Synthetic-generator config file: flat JSON with SynthConfig field names
/// plus "mode" ("pattern" | "temporal-context").
SynthConfig load_synth_config(const std::filesystem::path& path);
SynthConfig parse_synth_config(std::string_view text);

}  // namespace excl
