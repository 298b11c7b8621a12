#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "excl/datapipe.hpp"
#include "excl/encoders.hpp"
#include "excl/gradcheck.hpp"
#include "excl/inference.hpp"
#include "excl/objectives.hpp"
#include "excl/predictors.hpp"

namespace excl {

enum class Objective { clf, reg };

/// Architecture and objective of one ExCL variant.
struct ModelSpec {
  Objective objective = Objective::clf;
  bool video_lstm = true;  // 2-m when true, 1-m when false
  PredictorKind predictor = PredictorKind::tied;
  int vocab_size = 2;
  int embedding_dim = 300;
  int feature_dim = 1024;
  int query_hidden = 256;      // per direction
  int video_hidden = 256;      // per direction
  int predictor_hidden = 128;  // per direction
  int mlp_hidden = 256;
  double dropout = 0.5;
  RegLossKind reg_loss = RegLossKind::abs;

  std::string label() const {
    return variant_label(objective == Objective::reg, video_lstm, predictor_letter(predictor));
  }
  int query_dim() const { return 2 * query_hidden; }
  int video_dim() const { return video_lstm ? 2 * video_hidden : feature_dim; }
};

struct ModelPrediction {
  SpanIndices frames;  // decoded frames (clf) or the frames containing the expected times (reg)
  Interval seconds;
};

/// Full model: query encoder, optional video encoder, span predictor.
/// Parameter names: "embeddings", "query_lstm.*", "video_lstm.*", "pred.*".
template <typename Scalar>
class ExclModel {
 public:
  /// Fresh parameters; `embeddings` (vocab x embedding_dim), when given,
  /// replaces the random table.
  ExclModel(const ModelSpec& spec, Rng& init, const Matrix<double>* embeddings = nullptr);
  /// Binds to an existing parameter set (e.g. from a checkpoint).
  ExclModel(const ModelSpec& spec, ParameterStore<Scalar> params);

  ExclModel(const ExclModel&) = delete;
  ExclModel& operator=(const ExclModel&) = delete;

  const ModelSpec& spec() const { return spec_; }
  ParameterStore<Scalar>& params() { return params_; }
  const ParameterStore<Scalar>& params() const { return params_; }

  /// S_start, S_end (T x 1) for one clip; `features` must hold only valid frames.
  SpanScoresVar<Scalar> scores(Tape<Scalar>& tape, const Matrix<Scalar>& features, std::span<const int> tokens,
                               const DropoutSpec& drop = {}) const;

  /// Mean objective over a batch.
  Var<Scalar> batch_loss(Tape<Scalar>& tape, const Batch& batch, double fps, const DropoutSpec& drop = {}) const;

  /// Eval-mode prediction for one clip.
  ModelPrediction predict(const Matrix<float>& features, std::span<const int> tokens, double fps) const;

 private:
  void bind();

  ModelSpec spec_;
  ParameterStore<Scalar> params_;
  Parameter<Scalar>* embeddings_ = nullptr;
  LstmParams<Scalar> query_lstm_;
  std::optional<LstmParams<Scalar>> video_lstm_;
  PredictorParams<Scalar> predictor_;
};

extern template class ExclModel<float>;
extern template class ExclModel<double>;

/// Tiny fixture used by the gradient suite: two clips (7 and 5 frames,
/// 5-d features) with 4-token queries, all hidden sizes 6.
struct GradcheckFixture {
  ModelSpec spec;
  Batch batch;
  double fps = 5.0;
};

GradcheckFixture make_gradcheck_fixture(Objective objective, bool video_lstm, PredictorKind predictor);

struct GradcheckRow {
  std::string label;
  GradCheckResult result;
  double seconds = 0.0;
};

/// Optional term added to the fixture loss (used to inject faulty ops).
using ExtraLossTerm = std::function<Var<double>(Tape<double>&, ParameterStore<double>&)>;

GradcheckRow gradcheck_variant(Objective objective, bool video_lstm, PredictorKind predictor, double eps = 1e-4,
                               const ExtraLossTerm& extra = {});

/// All 12 combinations {clf,reg} x {1,2} x {a,b,c}.
std::vector<GradcheckRow> gradcheck_all(double eps = 1e-4);

}  // namespace excl
