#pragma once

#include <span>

#include "excl/lstm.hpp"
#include "excl/vocab.hpp"

namespace excl {

/// Sentence embedding h^T: [final forward state at the last real token ;
/// final backward state at the first token], shape 1 x 2H.
/// Trailing PAD ids are ignored.
template <typename Scalar>
Var<Scalar> encode_query(std::span<const int> token_ids, Var<Scalar> embeddings,
                         const LstmParams<Scalar>& query_lstm, const DropoutSpec& drop = {}) {
  std::size_t len = token_ids.size();
  while (len > 0 && token_ids[len - 1] == Vocabulary::kPad) --len;
  if (len == 0) throw ShapeError("encode_query: query has no non-PAD tokens");
  Var<Scalar> emb = gather_rows(embeddings, token_ids.first(len));
  auto out = bilstm_forward(emb, query_lstm, drop);
  return concat({out.final_fw, out.final_bw});
}

/// Per-frame video context h^V. With the video LSTM enabled this is the
/// T x 2H BiLSTM state matrix; otherwise the raw features pass through.
template <typename Scalar>
Var<Scalar> encode_video(Var<Scalar> features, bool use_video_lstm, const LstmParams<Scalar>* video_lstm,
                         const DropoutSpec& drop = {}) {
  if (features.rows() == 0) throw ShapeError("encode_video: empty sequence");
  if (!use_video_lstm) return features;
  if (!video_lstm) throw ShapeError("encode_video: video LSTM requested but not configured");
  return bilstm_forward(features, *video_lstm, drop).states;
}

}  // namespace excl
