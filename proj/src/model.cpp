#include "excl/model.hpp"

#include <chrono>

namespace excl {

template <typename Scalar>
ExclModel<Scalar>::ExclModel(const ModelSpec& spec, Rng& init, const Matrix<double>* embeddings) : spec_(spec) {
  Matrix<double> table;
  if (embeddings) {
    if (embeddings->rows() != spec.vocab_size || embeddings->cols() != spec.embedding_dim)
      throw ShapeError("model: embedding table " + to_string(shape_of(*embeddings)) + " does not match vocab " +
                       std::to_string(spec.vocab_size) + " x dim " + std::to_string(spec.embedding_dim));
    table = *embeddings;
  } else {
    table.resize(spec.vocab_size, spec.embedding_dim);
    for (Eigen::Index r = 0; r < table.rows(); ++r)
      for (Eigen::Index c = 0; c < table.cols(); ++c) table(r, c) = init.normal(0.0, 0.1);
  }
  params_.add("embeddings", table.cast<Scalar>());
  make_bilstm(params_, "query_lstm", spec.embedding_dim, spec.query_hidden, init);
  if (spec.video_lstm) make_bilstm(params_, "video_lstm", spec.feature_dim, spec.video_hidden, init);
  PredictorDims dims;
  dims.video_dim = spec.video_dim();
  dims.query_dim = spec.query_dim();
  dims.lstm_hidden = spec.predictor_hidden;
  dims.mlp_hidden = spec.mlp_hidden;
  make_predictor(params_, spec.predictor, dims, init);
  bind();
}

template <typename Scalar>
ExclModel<Scalar>::ExclModel(const ModelSpec& spec, ParameterStore<Scalar> params)
    : spec_(spec), params_(std::move(params)) {
  bind();
  const auto& emb = embeddings_->value;
  if (emb.rows() != spec.vocab_size || emb.cols() != spec.embedding_dim)
    throw ShapeError("model: stored embeddings " + to_string(shape_of(emb)) + " disagree with the model shape");
  if (spec.video_lstm && video_lstm_->input() != spec.feature_dim)
    throw ShapeError("model: stored video LSTM expects " + std::to_string(video_lstm_->input()) + "-d features");
}

template <typename Scalar>
void ExclModel<Scalar>::bind() {
  embeddings_ = &params_.at("embeddings");
  query_lstm_ = find_bilstm(params_, "query_lstm");
  if (spec_.video_lstm) video_lstm_ = find_bilstm(params_, "video_lstm");
  predictor_ = find_predictor(params_, spec_.predictor);
}

template <typename Scalar>
SpanScoresVar<Scalar> ExclModel<Scalar>::scores(Tape<Scalar>& tape, const Matrix<Scalar>& features,
                                                std::span<const int> tokens, const DropoutSpec& drop) const {
  if (features.cols() != spec_.feature_dim)
    throw ShapeError("model: clip has " + std::to_string(features.cols()) + "-d features, model expects " +
                     std::to_string(spec_.feature_dim));
  Var<Scalar> ht = encode_query(tokens, tape.parameter(*embeddings_), query_lstm_, drop);
  Var<Scalar> hv = encode_video(tape.input(features), spec_.video_lstm, video_lstm_ ? &*video_lstm_ : nullptr, drop);
  return predict_spans(hv, ht, predictor_, drop);
}

template <typename Scalar>
Var<Scalar> ExclModel<Scalar>::batch_loss(Tape<Scalar>& tape, const Batch& batch, double fps,
                                          const DropoutSpec& drop) const {
  if (batch.size() == 0) throw ShapeError("batch_loss: empty batch");
  std::vector<SpanScoresVar<Scalar>> all;
  std::vector<FrameMask> masks;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int len = batch.lengths[b];
    Matrix<Scalar> feats = batch.features[b].topRows(len).template cast<Scalar>();
    all.push_back(scores(tape, feats, batch.token_ids[b], drop));
    masks.push_back(batch.frame_masks[b].head(len));
  }
  if (spec_.objective == Objective::clf)
    return clf_nll_loss<Scalar>(all, batch.targets, masks);

  std::vector<RegPredictionVar<Scalar>> preds;
  std::vector<NormalizedSpan> targets;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int len = batch.lengths[b];
    const auto [st, et] = normalized_frame_times<Scalar>(len);
    preds.push_back(expected_times(all[b], st, et, masks[b]));
    const double duration = len / fps;
    targets.push_back({batch.targets[b].start_sec / duration, batch.targets[b].end_sec / duration});
  }
  return reg_loss<Scalar>(preds, targets, spec_.reg_loss);
}

template <typename Scalar>
ModelPrediction ExclModel<Scalar>::predict(const Matrix<float>& features, std::span<const int> tokens,
                                           double fps) const {
  Tape<Scalar> tape(false);
  const Matrix<Scalar> feats = features.template cast<Scalar>();
  const auto sc = scores(tape, feats, tokens);
  const Eigen::Index frames = feats.rows();
  const FrameMask mask = full_mask(frames);
  ModelPrediction out;
  if (spec_.objective == Objective::clf) {
    out.frames = decode_span(sc.start.value().col(0), sc.end.value().col(0), mask);
    out.seconds = frames_to_seconds(out.frames.start, out.frames.end, fps);
  } else {
    const auto [st, et] = normalized_frame_times<Scalar>(frames);
    const RegPrediction r = expected_times(sc.start.value().col(0), sc.end.value().col(0), st, et, mask);
    const double duration = static_cast<double>(frames) / fps;
    out.seconds = {r.t_s * duration, r.t_e * duration};
    out.frames = seconds_to_frames(out.seconds.start, out.seconds.end, fps, static_cast<int>(frames));
  }
  return out;
}

template class ExclModel<float>;
template class ExclModel<double>;

GradcheckFixture make_gradcheck_fixture(Objective objective, bool video_lstm, PredictorKind predictor) {
  GradcheckFixture fx;
  fx.spec.objective = objective;
  fx.spec.video_lstm = video_lstm;
  fx.spec.predictor = predictor;
  fx.spec.vocab_size = 10;
  fx.spec.embedding_dim = 5;
  fx.spec.feature_dim = 5;
  fx.spec.query_hidden = fx.spec.video_hidden = fx.spec.predictor_hidden = fx.spec.mlp_hidden = 6;
  fx.spec.dropout = 0.5;

  Rng rng(20240611);
  const int frames[2] = {7, 5};
  const std::vector<std::vector<int>> tokens = {{2, 5, 7, 3}, {4, 9, 6, 8}};
  const SpanIndices spans[2] = {{2, 4}, {1, 1}};
  Batch& b = fx.batch;
  for (int i = 0; i < 2; ++i) {
    Matrix<float> f = Matrix<float>::Zero(7, 5);
    for (int t = 0; t < frames[i]; ++t)
      for (int d = 0; d < 5; ++d) f(t, d) = static_cast<float>(rng.normal());
    b.features.push_back(f);
    b.frame_masks.push_back(prefix_mask(7, frames[i]));
    b.lengths.push_back(frames[i]);
    b.token_ids.push_back(tokens[static_cast<std::size_t>(i)]);
    b.token_masks.push_back(full_mask(4));
    const Interval secs = frames_to_seconds(spans[i].start, spans[i].end, fx.fps);
    // off-grid seconds keep the regression residuals away from the |x| kink
    b.targets.push_back({secs.start + 0.03, secs.end - 0.05, spans[i].start, spans[i].end});
    b.record_index.push_back(static_cast<std::size_t>(i));
  }
  return fx;
}

GradcheckRow gradcheck_variant(Objective objective, bool video_lstm, PredictorKind predictor, double eps,
                               const ExtraLossTerm& extra) {
  const auto start = std::chrono::steady_clock::now();
  const GradcheckFixture fx = make_gradcheck_fixture(objective, video_lstm, predictor);
  Rng init(99);
  ExclModel<double> model(fx.spec, init);
  auto loss_fn = [&](Tape<double>& tape) {
    Rng drop_rng(4242);
    DropoutSpec drop{fx.spec.dropout, true, &drop_rng};
    Var<double> loss = model.batch_loss(tape, fx.batch, fx.fps, drop);
    if (extra) loss = add(loss, extra(tape, model.params()));
    return loss;
  };
  GradcheckRow row;
  row.label = fx.spec.label();
  row.result = grad_check(loss_fn, model.params(), eps);
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::vector<GradcheckRow> gradcheck_all(double eps) {
  std::vector<GradcheckRow> rows;
  for (Objective obj : {Objective::clf, Objective::reg})
    for (bool video : {false, true})
      for (PredictorKind k : {PredictorKind::mlp, PredictorKind::tied, PredictorKind::conditioned})
        rows.push_back(gradcheck_variant(obj, video, k, eps));
  return rows;
}

}  // namespace excl
