#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "seqforge/attention.hpp"
#include "seqforge/cells.hpp"
#include "seqforge/errors.hpp"
#include "seqforge/rng.hpp"
#include "seqforge/tensor.hpp"
#include "seqforge/text.hpp"

namespace seqforge {

/// Architecture descriptor; uniquely determines every parameter shape.
struct Architecture {
  CellKind cell_kind = CellKind::kLstm;
  AttentionKind attention_kind = AttentionKind::kDot;
  Index embed_dim = 256;
  Index hidden_dim = 1024;
  Index att_dim = 0;  // 0 -> hidden_dim
  Index src_vocab = 0;
  Index tgt_vocab = 0;
  int max_len = 40;
  bool project_context = true;  // logits from [h; context] rather than h alone

  Index decoder_input_dim() const {
    return embed_dim + (attention_kind != AttentionKind::kNone ? hidden_dim : 0);
  }
  Index projection_rows() const {
    return hidden_dim * ((attention_kind != AttentionKind::kNone && project_context) ? 2 : 1);
  }
};

/// Per-pass execution options. Training enables dropout, which draws from rng.
template <typename S>
struct RunContextT {
  bool training = false;
  double dropout_rate = 0.0;
  Rng* rng = nullptr;
};

template <typename S>
struct Seq2SeqModelT {
  Architecture arch;
  EmbeddingTableT<S> source_embedding;
  EmbeddingTableT<S> target_embedding;
  RnnCellT<S> encoder_cell;
  RnnCellT<S> decoder_cell;
  AttentionParamsT<S> attention;
  TensorT<S> output_projection;  // projection_rows x tgt_vocab
  TensorT<S> output_bias;        // tgt_vocab x 1

  static Seq2SeqModelT init(const Architecture& arch, Rng& rng, bool forget_bias_one = true) {
    if (arch.src_vocab < 4 || arch.tgt_vocab < 4)
      throw ConfigError("vocabulary sizes must cover the four specials");
    Seq2SeqModelT m;
    m.arch = arch;
    if (m.arch.att_dim == 0) m.arch.att_dim = arch.hidden_dim;
    if (m.arch.attention_kind == AttentionKind::kNone) m.arch.project_context = false;
    m.source_embedding = EmbeddingTableT<S>::init(arch.src_vocab, arch.embed_dim, rng);
    m.target_embedding = EmbeddingTableT<S>::init(arch.tgt_vocab, arch.embed_dim, rng);
    m.encoder_cell = RnnCellT<S>::init(arch.cell_kind, arch.embed_dim, arch.hidden_dim, rng, forget_bias_one);
    m.decoder_cell =
        RnnCellT<S>::init(arch.cell_kind, m.arch.decoder_input_dim(), arch.hidden_dim, rng, forget_bias_one);
    m.attention = AttentionParamsT<S>::init(m.arch.attention_kind, arch.hidden_dim, m.arch.att_dim, rng);
    m.output_projection = TensorT<S>::param(glorot<S>(m.arch.projection_rows(), arch.tgt_vocab, rng));
    m.output_bias = TensorT<S>::param(MatrixOf<S>::Zero(arch.tgt_vocab, 1));
    return m;
  }

  std::vector<std::pair<std::string, TensorT<S>*>> named_params() {
    std::vector<std::pair<std::string, TensorT<S>*>> out;
    out.emplace_back("src_emb", &source_embedding.matrix);
    out.emplace_back("tgt_emb", &target_embedding.matrix);
    for (auto& p : encoder_cell.named_params("enc")) out.push_back(p);
    for (auto& p : decoder_cell.named_params("dec")) out.push_back(p);
    for (auto& p : attention.named_params("att")) out.push_back(p);
    out.emplace_back("out.W", &output_projection);
    out.emplace_back("out.b", &output_bias);
    return out;
  }

  std::vector<TensorT<S>*> params() {
    std::vector<TensorT<S>*> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
  }

  std::int64_t total_param_count() const {
    std::int64_t n = 0;
    auto& self = const_cast<Seq2SeqModelT&>(*this);
    for (auto& [name, t] : self.named_params()) n += t->size();
    return n;
  }
};

/// Encoder output: all per-step states (padded steps included), the pad mask,
/// and the state at the last real token, which seeds the decoder.
template <typename S>
struct EncodedSourceT {
  TensorT<S> states;  // T x hidden
  std::vector<bool> mask;
  RnnStateT<S> final_state;
};

template <typename S>
EncodedSourceT<S> encode(const std::vector<TokenId>& src_ids, const Seq2SeqModelT<S>& model) {
  if (src_ids.empty()) throw std::domain_error("cannot encode an empty sequence");
  std::ptrdiff_t last_real = -1;
  for (std::size_t t = 0; t < src_ids.size(); ++t)
    if (src_ids[t] != Specials::kPad) last_real = static_cast<std::ptrdiff_t>(t);
  if (last_real < 0) throw std::domain_error("source sequence contains only padding");

  EncodedSourceT<S> enc;
  enc.mask.reserve(src_ids.size());
  for (TokenId id : src_ids) enc.mask.push_back(id != Specials::kPad);

  auto state = RnnStateT<S>::zero(model.arch.cell_kind, model.arch.hidden_dim);
  enc.final_state = state;
  std::vector<TensorT<S>> step_states;
  step_states.reserve(src_ids.size());
  for (std::size_t t = 0; t < src_ids.size(); ++t) {
    auto x = embed_one(src_ids[t], model.source_embedding);
    state = cell_step(x, state, model.encoder_cell);
    step_states.push_back(state.h);
    if (static_cast<std::ptrdiff_t>(t) == last_real) enc.final_state = state;
  }
  enc.states = stack_rows(step_states);
  return enc;
}

template <typename S>
struct DecodeStepResultT {
  TensorT<S> logits;        // tgt_vocab x 1
  RnnStateT<S> state;
  TensorT<S> att_weights;   // invalid when attention is none
};

/// One decoder step. Attention reads the pre-step hidden state; the context
/// joins the token embedding as cell input and, when configured, the
/// projection input.
template <typename S>
DecodeStepResultT<S> decode_step(TokenId prev_token, const RnnStateT<S>& state, const EncodedSourceT<S>& enc,
                                 const Seq2SeqModelT<S>& model, const RunContextT<S>& ctx = {}) {
  const bool attending = model.arch.attention_kind != AttentionKind::kNone;
  auto x = embed_one(prev_token, model.target_embedding);

  DecodeStepResultT<S> out;
  TensorT<S> context_vec;
  if (attending) {
    auto energies = score(state.h, enc.states, model.attention);
    out.att_weights = attend(energies, enc.mask);
    context_vec = context(out.att_weights, enc.states);
    x = vconcat(x, context_vec);
  }
  if (ctx.training && ctx.dropout_rate > 0.0) x = dropout(x, ctx.dropout_rate, *ctx.rng, true);

  out.state = cell_step(x, state, model.decoder_cell);

  auto features = (attending && model.arch.project_context) ? vconcat(out.state.h, context_vec) : out.state.h;
  if (ctx.training && ctx.dropout_rate > 0.0) features = dropout(features, ctx.dropout_rate, *ctx.rng, true);
  out.logits = matmul(transpose(model.output_projection), features) + model.output_bias;
  return out;
}

/// Summed cross-entropy over the non-pad target positions plus the position
/// count, so batch losses can pool before dividing.
template <typename S>
struct LossPartsT {
  TensorT<S> total;
  std::int64_t positions = 0;
};

template <typename S>
LossPartsT<S> teacher_forced_parts(const std::vector<TokenId>& src_ids, const std::vector<TokenId>& tgt_ids,
                                   const Seq2SeqModelT<S>& model, const RunContextT<S>& ctx = {}) {
  bool has_content = false;
  for (TokenId id : tgt_ids)
    if (id != Specials::kPad && id != Specials::kSos && id != Specials::kEos) has_content = true;
  if (!has_content) throw std::domain_error("target sequence consists only of special tokens");
  if (tgt_ids.size() < 2 || tgt_ids.front() != Specials::kSos)
    throw ContractError("target sequence must start with <sos>");

  auto enc = encode(src_ids, model);
  auto state = enc.final_state;
  LossPartsT<S> parts;
  parts.total = TensorT<S>::constant(MatrixOf<S>::Zero(1, 1));
  for (std::size_t t = 1; t < tgt_ids.size() && tgt_ids[t] != Specials::kPad; ++t) {
    auto step = decode_step(tgt_ids[t - 1], state, enc, model, ctx);
    state = step.state;
    parts.total = parts.total + sparse_cross_entropy(step.logits, tgt_ids[t]);
    ++parts.positions;
  }
  return parts;
}

/// Teacher-forced mean loss: the decoder consumes ground-truth tokens and the
/// per-position losses average over non-pad target positions.
template <typename S>
TensorT<S> teacher_forced_loss(const std::vector<TokenId>& src_ids, const std::vector<TokenId>& tgt_ids,
                               const Seq2SeqModelT<S>& model, const RunContextT<S>& ctx = {}) {
  auto parts = teacher_forced_parts(src_ids, tgt_ids, model, ctx);
  return scale(parts.total, S(1) / S(parts.positions));
}

using RunContext = RunContextT<double>;
using Seq2SeqModel = Seq2SeqModelT<double>;
using EncodedSource = EncodedSourceT<double>;
using DecodeStepResult = DecodeStepResultT<double>;

}  // namespace seqforge
