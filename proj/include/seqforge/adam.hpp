#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "seqforge/errors.hpp"
#include "seqforge/tensor.hpp"

namespace seqforge {

/// Per-parameter Adam moments. m and v track the parameter's shape;
/// step_count advances by one per applied update.
template <typename Scalar>
struct AdamStateT {
  MatrixOf<Scalar> m;
  MatrixOf<Scalar> v;
  std::int64_t step_count = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
  Scalar learning_rate = Scalar(1e-3);

  static AdamStateT zeros_like(const TensorT<Scalar>& param, Scalar learning_rate = Scalar(1e-3)) {
    AdamStateT st;
    st.m = MatrixOf<Scalar>::Zero(param.rows(), param.cols());
    st.v = MatrixOf<Scalar>::Zero(param.rows(), param.cols());
    st.learning_rate = learning_rate;
    return st;
  }
};

/// One Adam update with bias correction. The caller owns grad clearing.
template <typename Scalar>
void adam_step(TensorT<Scalar>& param, AdamStateT<Scalar>& state) {
  if (!param.has_grad()) throw ContractError("adam_step on a parameter with no gradient");
  if (state.m.rows() != param.rows() || state.m.cols() != param.cols())
    throw DimensionError("adam state shape " + detail::shape_str(state.m.rows(), state.m.cols()) +
                         " does not match parameter " + param.shape_str());
  if (state.learning_rate <= Scalar(0)) throw ConfigError("adam learning_rate must be positive");
  if (state.beta1 < Scalar(0) || state.beta1 >= Scalar(1) || state.beta2 < Scalar(0) || state.beta2 >= Scalar(1))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (state.epsilon <= Scalar(0)) throw ConfigError("adam epsilon must be positive");

  const auto& g = param.grad();
  state.step_count += 1;
  state.m = state.beta1 * state.m + (Scalar(1) - state.beta1) * g;
  state.v = state.beta2 * state.v.array().matrix() + (Scalar(1) - state.beta2) * g.cwiseProduct(g);
  const Scalar bc1 = Scalar(1) - std::pow(state.beta1, Scalar(state.step_count));
  const Scalar bc2 = Scalar(1) - std::pow(state.beta2, Scalar(state.step_count));
  MatrixOf<Scalar> m_hat = state.m / bc1;
  MatrixOf<Scalar> v_hat = state.v / bc2;
  param.value().array() -= state.learning_rate * m_hat.array() / (v_hat.array().sqrt() + state.epsilon);
}

/// Convenience driver owning one AdamState per registered parameter. It
/// keeps tensor handles (shared graph nodes), so the owning model may be
/// moved around freely after registration.
template <typename Scalar>
class AdamT {
 public:
  AdamT() = default;
  AdamT(const std::vector<TensorT<Scalar>*>& params, Scalar learning_rate) {
    params_.reserve(params.size());
    states_.reserve(params.size());
    for (auto* p : params) {
      params_.push_back(*p);
      states_.push_back(AdamStateT<Scalar>::zeros_like(*p, learning_rate));
    }
  }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) adam_step(params_[i], states_[i]);
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  /// Scales all gradients down when their global L2 norm exceeds max_norm.
  void clip_global_norm(Scalar max_norm) {
    if (max_norm <= Scalar(0)) return;
    Scalar sq = Scalar(0);
    for (auto& p : params_)
      if (p.has_grad()) sq += p.grad().squaredNorm();
    const Scalar norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const Scalar k = max_norm / norm;
    for (auto& p : params_)
      if (p.has_grad()) p.grad_ref() *= k;
  }

  std::vector<AdamStateT<Scalar>>& states() { return states_; }
  const std::vector<AdamStateT<Scalar>>& states() const { return states_; }

 private:
  std::vector<TensorT<Scalar>> params_;  // shared handles, not raw pointers
  std::vector<AdamStateT<Scalar>> states_;
};

using AdamState = AdamStateT<double>;
using Adam = AdamT<double>;

}  // namespace seqforge
