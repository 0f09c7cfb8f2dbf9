#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seqforge/errors.hpp"
#include "seqforge/rng.hpp"
#include "seqforge/tensor.hpp"
#include "seqforge/text.hpp"

namespace seqforge {

enum class CellKind { kLstm, kGru };

inline const char* cell_kind_name(CellKind k) { return k == CellKind::kLstm ? "lstm" : "gru"; }

/// Glorot-uniform matrix: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename S>
MatrixOf<S> glorot(Index rows, Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  MatrixOf<S> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<S>(rng.uniform(-limit, limit));
  return m;
}

template <typename S>
struct EmbeddingTableT {
  TensorT<S> matrix;  // vocab_size x embed_dim

  Index vocab_size() const { return matrix.rows(); }
  Index embed_dim() const { return matrix.cols(); }

  static EmbeddingTableT init(Index vocab_size, Index embed_dim, Rng& rng) {
    return {TensorT<S>::param(glorot<S>(vocab_size, embed_dim, rng))};
  }
};

/// Gathered embedding rows, one row per id.
template <typename S>
TensorT<S> embed(const std::vector<TokenId>& ids, const EmbeddingTableT<S>& table) {
  return gather_rows(table.matrix, ids);
}

/// Single embedding as a column vector.
template <typename S>
TensorT<S> embed_one(TokenId id, const EmbeddingTableT<S>& table) {
  return transpose(gather_rows(table.matrix, std::vector<TokenId>{id}));
}

/// Gate-blocked recurrent cell parameters. LSTM holds four blocks in the
/// order input, forget, candidate, output; GRU holds three in the order
/// update, reset, candidate. Each block is W: hidden x input, U: hidden x
/// hidden, b: hidden x 1.
template <typename S>
struct RnnCellT {
  CellKind kind = CellKind::kLstm;
  Index input_dim = 0;
  Index hidden_dim = 0;
  std::vector<TensorT<S>> input_weights;
  std::vector<TensorT<S>> recurrent_weights;
  std::vector<TensorT<S>> biases;

  static RnnCellT init(CellKind kind, Index input_dim, Index hidden_dim, Rng& rng, bool forget_bias_one = true) {
    RnnCellT cell;
    cell.kind = kind;
    cell.input_dim = input_dim;
    cell.hidden_dim = hidden_dim;
    const int gates = kind == CellKind::kLstm ? 4 : 3;
    for (int g = 0; g < gates; ++g) {
      cell.input_weights.push_back(TensorT<S>::param(glorot<S>(hidden_dim, input_dim, rng)));
      cell.recurrent_weights.push_back(TensorT<S>::param(glorot<S>(hidden_dim, hidden_dim, rng)));
      MatrixOf<S> b = MatrixOf<S>::Zero(hidden_dim, 1);
      if (kind == CellKind::kLstm && g == 1 && forget_bias_one) b.setOnes();
      cell.biases.push_back(TensorT<S>::param(std::move(b)));
    }
    return cell;
  }

  static RnnCellT zeros(CellKind kind, Index input_dim, Index hidden_dim) {
    RnnCellT cell;
    cell.kind = kind;
    cell.input_dim = input_dim;
    cell.hidden_dim = hidden_dim;
    const int gates = kind == CellKind::kLstm ? 4 : 3;
    for (int g = 0; g < gates; ++g) {
      cell.input_weights.push_back(TensorT<S>::param(MatrixOf<S>::Zero(hidden_dim, input_dim)));
      cell.recurrent_weights.push_back(TensorT<S>::param(MatrixOf<S>::Zero(hidden_dim, hidden_dim)));
      cell.biases.push_back(TensorT<S>::param(MatrixOf<S>::Zero(hidden_dim, 1)));
    }
    return cell;
  }

  std::vector<std::pair<std::string, TensorT<S>*>> named_params(const std::string& prefix) {
    static constexpr const char* kLstmGates[] = {"i", "f", "g", "o"};
    static constexpr const char* kGruGates[] = {"z", "r", "h"};
    std::vector<std::pair<std::string, TensorT<S>*>> out;
    for (std::size_t g = 0; g < input_weights.size(); ++g) {
      const char* name = kind == CellKind::kLstm ? kLstmGates[g] : kGruGates[g];
      out.emplace_back(prefix + ".W_" + name, &input_weights[g]);
      out.emplace_back(prefix + ".U_" + name, &recurrent_weights[g]);
      out.emplace_back(prefix + ".b_" + name, &biases[g]);
    }
    return out;
  }
};

/// Hidden state carried between steps; cell is empty for GRU.
template <typename S>
struct RnnStateT {
  TensorT<S> h;
  TensorT<S> c;

  static RnnStateT zero(CellKind kind, Index hidden_dim) {
    RnnStateT s;
    s.h = TensorT<S>::constant(MatrixOf<S>::Zero(hidden_dim, 1));
    if (kind == CellKind::kLstm) s.c = TensorT<S>::constant(MatrixOf<S>::Zero(hidden_dim, 1));
    return s;
  }
};

namespace detail {

template <typename S>
void check_step_shapes(const TensorT<S>& x, const TensorT<S>& h_prev, const RnnCellT<S>& p) {
  if (x.size() != p.input_dim || x.cols() != 1)
    throw DimensionError("cell input has shape " + x.shape_str() + ", expected (" +
                         std::to_string(p.input_dim) + "x1)");
  if (h_prev.size() != p.hidden_dim || h_prev.cols() != 1)
    throw DimensionError("cell state has shape " + h_prev.shape_str() + ", expected (" +
                         std::to_string(p.hidden_dim) + "x1)");
}

template <typename S>
TensorT<S> gate_preact(const RnnCellT<S>& p, std::size_t g, const TensorT<S>& x, const TensorT<S>& h) {
  return matmul(p.input_weights[g], x) + matmul(p.recurrent_weights[g], h) + p.biases[g];
}

}  // namespace detail

/// One LSTM step: i,f,o logistic gates, g tanh candidate,
/// c = f.c_prev + i.g, h = o.tanh(c).
template <typename S>
std::pair<TensorT<S>, TensorT<S>> lstm_step(const TensorT<S>& x, const TensorT<S>& h_prev,
                                            const TensorT<S>& c_prev, const RnnCellT<S>& p) {
  if (p.kind != CellKind::kLstm) throw ContractError("lstm_step on a non-LSTM cell");
  detail::check_step_shapes(x, h_prev, p);
  auto i = sigmoid(detail::gate_preact(p, 0, x, h_prev));
  auto f = sigmoid(detail::gate_preact(p, 1, x, h_prev));
  auto g = tanh(detail::gate_preact(p, 2, x, h_prev));
  auto o = sigmoid(detail::gate_preact(p, 3, x, h_prev));
  auto c = cmul(f, c_prev) + cmul(i, g);
  auto h = cmul(o, tanh(c));
  return {h, c};
}

/// One GRU step with the candidate built from the reset-gated state and the
/// update gate weighting the candidate: h = (1-z).h_prev + z.h_tilde.
template <typename S>
TensorT<S> gru_step(const TensorT<S>& x, const TensorT<S>& h_prev, const RnnCellT<S>& p) {
  if (p.kind != CellKind::kGru) throw ContractError("gru_step on a non-GRU cell");
  detail::check_step_shapes(x, h_prev, p);
  auto z = sigmoid(detail::gate_preact(p, 0, x, h_prev));
  auto r = sigmoid(detail::gate_preact(p, 1, x, h_prev));
  auto candidate = tanh(matmul(p.input_weights[2], x) + matmul(p.recurrent_weights[2], cmul(r, h_prev)) + p.biases[2]);
  return h_prev + cmul(z, candidate - h_prev);
}

/// Dispatches on the cell kind; returns the new state.
template <typename S>
RnnStateT<S> cell_step(const TensorT<S>& x, const RnnStateT<S>& state, const RnnCellT<S>& p) {
  if (p.kind == CellKind::kLstm) {
    auto [h, c] = lstm_step(x, state.h, state.c, p);
    return {h, c};
  }
  return {gru_step(x, state.h, p), TensorT<S>()};
}

/// Trainable scalar count of one cell: gates * (in*hidden + hidden^2 + hidden).
/// The GRU/LSTM ratio is exactly 3/4 for any dimensions.
inline std::int64_t param_count(CellKind kind, std::int64_t input_dim, std::int64_t hidden_dim) {
  if (input_dim < 1 || hidden_dim < 1) throw ConfigError("param_count dimensions must be >= 1");
  const std::int64_t block = input_dim * hidden_dim + hidden_dim * hidden_dim + hidden_dim;
  return (kind == CellKind::kLstm ? 4 : 3) * block;
}

using EmbeddingTable = EmbeddingTableT<double>;
using RnnCell = RnnCellT<double>;
using RnnState = RnnStateT<double>;

}  // namespace seqforge
