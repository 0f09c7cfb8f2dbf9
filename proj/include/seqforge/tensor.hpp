#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "seqforge/errors.hpp"
#include "seqforge/rng.hpp"

namespace seqforge {

using Index = Eigen::Index;

/// Dense row-major matrix; vectors are stored as n x 1.
template <typename Scalar>
using MatrixOf = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

template <typename Scalar>
struct NodeT {
  MatrixOf<Scalar> value;
  MatrixOf<Scalar> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::function<void()> backward;
  std::vector<std::shared_ptr<NodeT>> parents;

  MatrixOf<Scalar>& grad_ref() {
    if (grad.size() == 0) grad = MatrixOf<Scalar>::Zero(value.rows(), value.cols());
    return grad;
  }
};

inline std::string shape_str(Index rows, Index cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

}  // namespace detail

/// Differentiable dense tensor. Copying a Tensor copies the handle, not the
/// storage; ops on tensors with requires_grad record a reverse-mode graph
/// that backward() replays. The graph is freed when the result handles die.
template <typename Scalar>
class TensorT {
 public:
  using Mat = MatrixOf<Scalar>;
  using Node = detail::NodeT<Scalar>;

  TensorT() = default;

  static TensorT constant(Mat v) { return TensorT(std::move(v), false); }
  static TensorT param(Mat v) { return TensorT(std::move(v), true); }

  static TensorT from(std::initializer_list<std::initializer_list<Scalar>> rows, bool requires_grad = false) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r > 0 ? static_cast<Index>(rows.begin()->size()) : 0;
    Mat m(r, c);
    Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != c)
        throw DimensionError("ragged initializer: row " + std::to_string(i));
      Index j = 0;
      for (Scalar x : row) m(i, j++) = x;
      ++i;
    }
    return TensorT(std::move(m), requires_grad);
  }

  /// Column vector from a flat list.
  static TensorT vec(std::initializer_list<Scalar> xs, bool requires_grad = false) {
    Mat m(static_cast<Index>(xs.size()), 1);
    Index i = 0;
    for (Scalar x : xs) m(i++, 0) = x;
    return TensorT(std::move(m), requires_grad);
  }

  static TensorT zeros(Index rows, Index cols, bool requires_grad = false) {
    return TensorT(Mat::Zero(rows, cols), requires_grad);
  }

  bool valid() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  bool is_vector() const { return rows() == 1 || cols() == 1; }
  bool is_scalar() const { return size() == 1; }
  std::vector<Index> shape() const { return {rows(), cols()}; }

  const Mat& value() const { return node_->value; }
  Mat& value() { return node_->value; }
  Scalar scalar() const {
    if (!is_scalar()) throw ContractError("scalar() on tensor of shape " + shape_str());
    return node_->value(0, 0);
  }

  /// Flat row-major view of the underlying storage.
  const Scalar* data() const { return node_->value.data(); }
  Scalar* data() { return node_->value.data(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && node_->grad.size() != 0; }
  const Mat& grad() const {
    if (!has_grad()) throw ContractError("grad accessed before backward");
    return node_->grad;
  }
  Mat& grad_ref() { return node_->grad_ref(); }
  void zero_grad() {
    if (node_ && node_->grad.size() != 0) node_->grad.setZero();
  }

  std::string shape_str() const { return detail::shape_str(rows(), cols()); }

  std::shared_ptr<Node> node() const { return node_; }

  /// Wraps an existing graph node; used by the op constructors below.
  explicit TensorT(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  TensorT(Mat v, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(v);
    node_->requires_grad = requires_grad;
  }

  std::shared_ptr<Node> node_;
};

namespace detail {

// Builds an op node: value plus, when any parent needs gradients, the parent
// links and a backward closure produced by make_backward(node).
template <typename S, typename Fn>
TensorT<S> make_op(MatrixOf<S> value, const std::vector<TensorT<S>>& parents, Fn&& make_backward) {
  auto node = std::make_shared<NodeT<S>>();
  node->value = std::move(value);
  for (const auto& p : parents) {
    if (p.requires_grad()) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = make_backward(node.get());
  }
  return TensorT<S>(std::move(node));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitive operations
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul inner dimensions disagree: " + a.shape_str() + " x " + b.shape_str());
  MatrixOf<S> out = a.value() * b.value();
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return detail::make_op<S>(std::move(out), {a, b}, [an, bn](detail::NodeT<S>* on) {
    return [an, bn, on] {
      const auto& g = on->grad_ref();
      if (an->requires_grad) an->grad_ref().noalias() += g * bn->value.transpose();
      if (bn->requires_grad) bn->grad_ref().noalias() += an->value.transpose() * g;
    };
  });
}

template <typename S>
TensorT<S> operator+(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("add shapes disagree: " + a.shape_str() + " vs " + b.shape_str());
  MatrixOf<S> out = a.value() + b.value();
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return detail::make_op<S>(std::move(out), {a, b}, [an, bn](detail::NodeT<S>* on) {
    return [an, bn, on] {
      const auto& g = on->grad_ref();
      if (an->requires_grad) an->grad_ref() += g;
      if (bn->requires_grad) bn->grad_ref() += g;
    };
  });
}

template <typename S>
TensorT<S> operator-(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("sub shapes disagree: " + a.shape_str() + " vs " + b.shape_str());
  MatrixOf<S> out = a.value() - b.value();
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return detail::make_op<S>(std::move(out), {a, b}, [an, bn](detail::NodeT<S>* on) {
    return [an, bn, on] {
      const auto& g = on->grad_ref();
      if (an->requires_grad) an->grad_ref() += g;
      if (bn->requires_grad) bn->grad_ref() -= g;
    };
  });
}

/// Elementwise (Hadamard) product.
template <typename S>
TensorT<S> cmul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("cmul shapes disagree: " + a.shape_str() + " vs " + b.shape_str());
  MatrixOf<S> out = a.value().cwiseProduct(b.value());
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return detail::make_op<S>(std::move(out), {a, b}, [an, bn](detail::NodeT<S>* on) {
    return [an, bn, on] {
      const auto& g = on->grad_ref();
      if (an->requires_grad) an->grad_ref() += g.cwiseProduct(bn->value);
      if (bn->requires_grad) bn->grad_ref() += g.cwiseProduct(an->value);
    };
  });
}

template <typename S>
TensorT<S> scale(const TensorT<S>& a, S k) {
  MatrixOf<S> out = a.value() * k;
  auto* an = a.node().get();
  return detail::make_op<S>(std::move(out), {a}, [an, k](detail::NodeT<S>* on) {
    return [an, k, on] { an->grad_ref() += on->grad_ref() * k; };
  });
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& a) {
  MatrixOf<S> out = a.value().unaryExpr([](S x) {
    // Split on sign so exp never overflows.
    return x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
  });
  auto* an = a.node().get();
  return detail::make_op<S>(std::move(out), {a}, [an](detail::NodeT<S>* on) {
    return [an, on] {
      const auto& y = on->value;
      an->grad_ref() += on->grad_ref().cwiseProduct(y.cwiseProduct((S(1) - y.array()).matrix()));
    };
  });
}

template <typename S>
TensorT<S> tanh(const TensorT<S>& a) {
  MatrixOf<S> out = a.value().array().tanh().matrix();
  auto* an = a.node().get();
  return detail::make_op<S>(std::move(out), {a}, [an](detail::NodeT<S>* on) {
    return [an, on] {
      const auto& y = on->value;
      an->grad_ref() += on->grad_ref().cwiseProduct((S(1) - y.array().square()).matrix());
    };
  });
}

template <typename S>
TensorT<S> transpose(const TensorT<S>& a) {
  MatrixOf<S> out = a.value().transpose();
  auto* an = a.node().get();
  return detail::make_op<S>(std::move(out), {a}, [an](detail::NodeT<S>* on) {
    return [an, on] { an->grad_ref() += on->grad_ref().transpose(); };
  });
}

template <typename S>
TensorT<S> sum(const TensorT<S>& a) {
  MatrixOf<S> out(1, 1);
  out(0, 0) = a.value().sum();
  auto* an = a.node().get();
  return detail::make_op<S>(std::move(out), {a}, [an](detail::NodeT<S>* on) {
    return [an, on] { an->grad_ref().array() += on->grad_ref()(0, 0); };
  });
}

/// Numerically stabilized softmax over a vector (n x 1 or 1 x n).
template <typename S>
TensorT<S> softmax(const TensorT<S>& a) {
  if (a.size() == 0) throw std::domain_error("softmax of empty tensor");
  if (!a.is_vector()) throw DimensionError("softmax expects a vector, got " + a.shape_str());
  const S m = a.value().maxCoeff();
  MatrixOf<S> out = (a.value().array() - m).exp().matrix();
  out /= out.sum();
  auto* an = a.node().get();
  return detail::make_op<S>(std::move(out), {a}, [an](detail::NodeT<S>* on) {
    return [an, on] {
      const auto& y = on->value;
      const auto& g = on->grad_ref();
      const S inner = y.cwiseProduct(g).sum();
      an->grad_ref() += y.cwiseProduct((g.array() - inner).matrix());
    };
  });
}

/// Softmax restricted to positions where valid[i] is true; invalid positions
/// get exactly zero weight. Normalization runs over the valid set only, which
/// is equivalent to pinning invalid energies at -inf before a plain softmax.
template <typename S>
TensorT<S> masked_softmax(const TensorT<S>& a, const std::vector<bool>& valid) {
  if (!a.is_vector()) throw DimensionError("masked_softmax expects a vector, got " + a.shape_str());
  if (static_cast<Index>(valid.size()) != a.size())
    throw DimensionError("mask length " + std::to_string(valid.size()) + " vs tensor " + a.shape_str());
  S m = std::numeric_limits<S>::lowest();
  bool any_valid = false;
  for (Index i = 0; i < a.size(); ++i) {
    if (valid[static_cast<std::size_t>(i)]) {
      any_valid = true;
      m = std::max(m, a.value()(i));
    }
  }
  if (!any_valid) throw std::domain_error("masked_softmax with all positions masked");
  MatrixOf<S> out = MatrixOf<S>::Zero(a.rows(), a.cols());
  S z = S(0);
  for (Index i = 0; i < a.size(); ++i) {
    if (valid[static_cast<std::size_t>(i)]) {
      out(i) = std::exp(a.value()(i) - m);
      z += out(i);
    }
  }
  out /= z;
  auto* an = a.node().get();
  return detail::make_op<S>(std::move(out), {a}, [an](detail::NodeT<S>* on) {
    return [an, on] {
      // Masked outputs are zero, so the dense softmax Jacobian collapses to
      // the valid set on its own.
      const auto& y = on->value;
      const auto& g = on->grad_ref();
      const S inner = y.cwiseProduct(g).sum();
      an->grad_ref() += y.cwiseProduct((g.array() - inner).matrix());
    };
  });
}

/// -log softmax(logits)[target]. With masked=true (a padding position) the
/// result is a constant zero detached from the graph.
template <typename S>
TensorT<S> sparse_cross_entropy(const TensorT<S>& logits, Index target, bool masked = false) {
  if (!logits.is_vector()) throw DimensionError("sparse_cross_entropy expects a vector, got " + logits.shape_str());
  if (target < 0 || target >= logits.size())
    throw std::out_of_range("target id " + std::to_string(target) + " out of range for " +
                            std::to_string(logits.size()) + " classes");
  if (masked) return TensorT<S>::constant(MatrixOf<S>::Zero(1, 1));
  const S m = logits.value().maxCoeff();
  const S lse = m + std::log((logits.value().array() - m).exp().sum());
  MatrixOf<S> out(1, 1);
  out(0, 0) = lse - logits.value()(target);
  auto* ln = logits.node().get();
  return detail::make_op<S>(std::move(out), {logits}, [ln, target](detail::NodeT<S>* on) {
    return [ln, target, on] {
      const S g = on->grad_ref()(0, 0);
      const S m2 = ln->value.maxCoeff();
      MatrixOf<S> p = (ln->value.array() - m2).exp().matrix();
      p /= p.sum();
      p(target) -= S(1);
      ln->grad_ref() += g * p;
    };
  });
}

/// Stack of two blocks, a on top of b. Column counts must agree.
template <typename S>
TensorT<S> vconcat(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.cols() != b.cols())
    throw DimensionError("vconcat column counts disagree: " + a.shape_str() + " vs " + b.shape_str());
  MatrixOf<S> out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.value();
  out.bottomRows(b.rows()) = b.value();
  auto* an = a.node().get();
  auto* bn = b.node().get();
  const Index ar = a.rows();
  return detail::make_op<S>(std::move(out), {a, b}, [an, bn, ar](detail::NodeT<S>* on) {
    return [an, bn, ar, on] {
      const auto& g = on->grad_ref();
      if (an->requires_grad) an->grad_ref() += g.topRows(ar);
      if (bn->requires_grad) bn->grad_ref() += g.bottomRows(g.rows() - ar);
    };
  });
}

/// Side-by-side blocks, a left of b. Row counts must agree.
template <typename S>
TensorT<S> hconcat(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.rows() != b.rows())
    throw DimensionError("hconcat row counts disagree: " + a.shape_str() + " vs " + b.shape_str());
  MatrixOf<S> out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.value();
  out.rightCols(b.cols()) = b.value();
  auto* an = a.node().get();
  auto* bn = b.node().get();
  const Index ac = a.cols();
  return detail::make_op<S>(std::move(out), {a, b}, [an, bn, ac](detail::NodeT<S>* on) {
    return [an, bn, ac, on] {
      const auto& g = on->grad_ref();
      if (an->requires_grad) an->grad_ref() += g.leftCols(ac);
      if (bn->requires_grad) bn->grad_ref() += g.rightCols(g.cols() - ac);
    };
  });
}

/// Gathers table rows by id into a (ids.size() x cols) matrix. Backward
/// scatter-adds into the gathered rows, so repeated ids accumulate.
template <typename S>
TensorT<S> gather_rows(const TensorT<S>& table, const std::vector<std::int32_t>& ids) {
  for (std::int32_t id : ids) {
    if (id < 0 || id >= table.rows())
      throw std::out_of_range("row id " + std::to_string(id) + " out of range for table " + table.shape_str());
  }
  MatrixOf<S> out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  auto* tn = table.node().get();
  return detail::make_op<S>(std::move(out), {table}, [tn, ids](detail::NodeT<S>* on) {
    return [tn, ids, on] {
      auto& g = tn->grad_ref();
      const auto& up = on->grad_ref();
      for (std::size_t i = 0; i < ids.size(); ++i) g.row(ids[i]) += up.row(static_cast<Index>(i));
    };
  });
}

/// Stacks column vectors as rows of a (n x dim) matrix.
template <typename S>
TensorT<S> stack_rows(const std::vector<TensorT<S>>& columns) {
  if (columns.empty()) throw std::domain_error("stack_rows of zero vectors");
  const Index dim = columns.front().size();
  MatrixOf<S> out(static_cast<Index>(columns.size()), dim);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const auto& c = columns[i];
    if (!c.is_vector() || c.size() != dim)
      throw DimensionError("stack_rows vector " + std::to_string(i) + " has shape " + c.shape_str());
    for (Index j = 0; j < dim; ++j) out(static_cast<Index>(i), j) = c.value()(j);
  }
  std::vector<detail::NodeT<S>*> raw;
  raw.reserve(columns.size());
  for (const auto& c : columns) raw.push_back(c.node().get());
  return detail::make_op<S>(std::move(out), columns, [raw](detail::NodeT<S>* on) {
    return [raw, on] {
      const auto& g = on->grad_ref();
      for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!raw[i]->requires_grad) continue;
        auto& pg = raw[i]->grad_ref();
        for (Index j = 0; j < g.cols(); ++j) pg(j) += g(static_cast<Index>(i), j);
      }
    };
  });
}

/// Tiles a vector of length n as count identical rows of a (count x n) matrix.
template <typename S>
TensorT<S> rep_rows(const TensorT<S>& v, Index count) {
  if (!v.is_vector()) throw DimensionError("rep_rows expects a vector, got " + v.shape_str());
  if (count < 1) throw DimensionError("rep_rows count must be positive");
  const Index n = v.size();
  MatrixOf<S> out(count, n);
  for (Index i = 0; i < count; ++i)
    for (Index j = 0; j < n; ++j) out(i, j) = v.value()(j);
  auto* vn = v.node().get();
  return detail::make_op<S>(std::move(out), {v}, [vn](detail::NodeT<S>* on) {
    return [vn, on] {
      const auto& g = on->grad_ref();
      auto& pg = vn->grad_ref();
      for (Index j = 0; j < g.cols(); ++j) pg(j) += g.col(j).sum();
    };
  });
}

/// Inverted dropout. In train mode units survive with probability 1-rate and
/// are scaled by 1/(1-rate); in eval mode (or rate 0) this is the identity
/// and consumes no randomness.
template <typename S>
TensorT<S> dropout(const TensorT<S>& a, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return a;
  const S keep_scale = S(1) / S(1.0 - rate);
  MatrixOf<S> mask(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) mask(i, j) = rng.bernoulli(rate) ? S(0) : keep_scale;
  MatrixOf<S> out = a.value().cwiseProduct(mask);
  auto* an = a.node().get();
  return detail::make_op<S>(std::move(out), {a}, [an, mask = std::move(mask)](detail::NodeT<S>* on) {
    return [an, mask, on] { an->grad_ref() += on->grad_ref().cwiseProduct(mask); };
  });
}

// ---------------------------------------------------------------------------
// Reverse pass
// ---------------------------------------------------------------------------

/// Runs reverse-mode accumulation from a scalar loss. Gradients add into the
/// grad slots of every reachable requires_grad tensor; call zero_grad between
/// batches to reset. Repeated backward calls accumulate.
template <typename S>
void backward(const TensorT<S>& loss) {
  if (!loss.is_scalar()) throw ContractError("backward requires a scalar loss, got " + loss.shape_str());
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; sequence graphs get deep enough that recursion
  // is not safe.
  using Node = detail::NodeT<S>;
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Node* child = node->parents[next_child++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_ref()(0, 0) += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward();
  }
}

template <typename S>
bool all_finite(const TensorT<S>& t) {
  return t.value().allFinite();
}

/// Plain-value log softmax for inference paths that bypass the graph.
template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, 1> log_softmax_value(const MatrixOf<S>& logits) {
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> x(logits.data(), logits.size());
  const S m = x.maxCoeff();
  const S lse = m + std::log((x.array() - m).exp().sum());
  return (x.array() - lse).matrix();
}

using Tensor = TensorT<double>;

}  // namespace seqforge
