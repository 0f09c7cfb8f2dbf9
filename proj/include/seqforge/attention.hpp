#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "seqforge/errors.hpp"
#include "seqforge/rng.hpp"
#include "seqforge/tensor.hpp"

namespace seqforge {

enum class AttentionKind { kNone, kDot, kGeneral, kConcat, kScaledDot };

const char* attention_kind_name(AttentionKind k);
AttentionKind attention_kind_from_name(const std::string& name);

/// Scoring parameters for global attention. W_a exists exactly for the
/// general kind; W_c and v_a exactly for concat.
template <typename S>
struct AttentionParamsT {
  AttentionKind kind = AttentionKind::kDot;
  Index hidden_dim = 0;
  Index att_dim = 0;
  TensorT<S> W_a;  // hidden x hidden
  TensorT<S> W_c;  // 2*hidden x att_dim
  TensorT<S> v_a;  // att_dim x 1

  static AttentionParamsT init(AttentionKind kind, Index hidden_dim, Index att_dim, Rng& rng) {
    AttentionParamsT p;
    p.kind = kind;
    p.hidden_dim = hidden_dim;
    p.att_dim = att_dim > 0 ? att_dim : hidden_dim;
    if (kind == AttentionKind::kGeneral) {
      p.W_a = TensorT<S>::param(glorot<S>(hidden_dim, hidden_dim, rng));
    } else if (kind == AttentionKind::kConcat) {
      p.W_c = TensorT<S>::param(glorot<S>(2 * hidden_dim, p.att_dim, rng));
      p.v_a = TensorT<S>::param(glorot<S>(p.att_dim, 1, rng));
    }
    return p;
  }

  std::vector<std::pair<std::string, TensorT<S>*>> named_params(const std::string& prefix) {
    std::vector<std::pair<std::string, TensorT<S>*>> out;
    if (kind == AttentionKind::kGeneral) out.emplace_back(prefix + ".W_a", &W_a);
    if (kind == AttentionKind::kConcat) {
      out.emplace_back(prefix + ".W_c", &W_c);
      out.emplace_back(prefix + ".v_a", &v_a);
    }
    return out;
  }
};

/// Alignment energies e_j = score(h_dec, h_j) over all encoder rows.
/// dot:        h_dec . h_j
/// general:    h_dec . (W_a h_j)
/// concat:     v_a . tanh(W_c [h_dec; h_j])
/// scaled_dot: (h_dec . h_j) / sqrt(hidden)
template <typename S>
TensorT<S> score(const TensorT<S>& h_dec, const TensorT<S>& H_enc, const AttentionParamsT<S>& p) {
  if (H_enc.rows() < 1) throw DimensionError("score needs at least one encoder state");
  if (h_dec.cols() != 1 || h_dec.rows() != H_enc.cols())
    throw DimensionError("decoder state " + h_dec.shape_str() + " does not match encoder states " +
                         H_enc.shape_str());
  switch (p.kind) {
    case AttentionKind::kDot:
      return matmul(H_enc, h_dec);
    case AttentionKind::kScaledDot:
      return scale(matmul(H_enc, h_dec), S(1) / std::sqrt(S(H_enc.cols())));
    case AttentionKind::kGeneral: {
      if (!p.W_a.valid()) throw ConfigError("general attention requires W_a");
      // e_j = h_dec^T W_a h_j  ==  row_j(H_enc) . (W_a^T h_dec)
      return matmul(H_enc, matmul(transpose(p.W_a), h_dec));
    }
    case AttentionKind::kConcat: {
      if (!p.W_c.valid() || !p.v_a.valid()) throw ConfigError("concat attention requires W_c and v_a");
      auto joined = hconcat(rep_rows(h_dec, H_enc.rows()), H_enc);  // rows: [h_dec^T h_j^T]
      return matmul(tanh(matmul(joined, p.W_c)), p.v_a);
    }
    case AttentionKind::kNone:
      throw ConfigError("score called with attention kind none");
  }
  throw ConfigError("unknown attention kind");
}

/// Normalized attention weights: softmax over positions where source_mask is
/// true; padding positions get exactly zero.
template <typename S>
TensorT<S> attend(const TensorT<S>& energies, const std::vector<bool>& source_mask) {
  return masked_softmax(energies, source_mask);
}

template <typename S>
TensorT<S> attend(const TensorT<S>& energies) {
  return masked_softmax(energies, std::vector<bool>(static_cast<std::size_t>(energies.size()), true));
}

/// Context vector C = sum_j w_j h_j.
template <typename S>
TensorT<S> context(const TensorT<S>& weights, const TensorT<S>& H_enc) {
  if (!weights.is_vector() || weights.size() != H_enc.rows())
    throw DimensionError("weights " + weights.shape_str() + " do not match encoder states " + H_enc.shape_str());
  return matmul(transpose(H_enc), weights.cols() == 1 ? weights : transpose(weights));
}

/// Attention weights recorded while decoding: one row per emitted target
/// token, one column per encoder position.
struct AlignmentMap {
  std::vector<Eigen::VectorXd> rows;

  Eigen::MatrixXd matrix() const;
};

/// CSV layout: header row of source tokens, then one row per emitted target
/// token with its attention distribution.
void write_alignment_csv(const AlignmentMap& map, const std::vector<std::string>& source_tokens,
                         const std::vector<std::string>& target_tokens, const std::string& path);

using AttentionParams = AttentionParamsT<double>;

}  // namespace seqforge
