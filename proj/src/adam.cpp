#include "fcnbc/adam.hpp"

#include <cmath>

namespace fcnbc {

template <typename Scalar>
void adam_step(std::span<const ParamBlock<Scalar>> params, AdamState<Scalar>& state) {
  using Array = typename AdamState<Scalar>::Array;
  if (!(state.learning_rate > 0.0)) throw ConfigError("Adam learning rate must be positive");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Array::Zero(p.size));
      state.v.push_back(Array::Zero(p.size));
    }
  }
  if (state.m.size() != params.size()) throw ConfigError("Adam state does not match the parameter set");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    if (state.m[k].size() != p.size) throw ConfigError("Adam state size mismatch for block " + p.name);
    if (!Eigen::Map<const Array>(p.grad, p.size).isFinite().all()) {
      throw NumericError("non-finite gradient in parameter block " + p.name);
    }
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const auto b1 = static_cast<Scalar>(state.beta1);
  const auto b2 = static_cast<Scalar>(state.beta2);
  const auto lr = static_cast<Scalar>(state.learning_rate);
  const auto eps = static_cast<Scalar>(state.epsilon);
  const auto c1 = static_cast<Scalar>(1.0 - std::pow(state.beta1, t));
  const auto c2 = static_cast<Scalar>(1.0 - std::pow(state.beta2, t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    Eigen::Map<Array> value(p.value, p.size);
    Eigen::Map<const Array> g(p.grad, p.size);
    Array& m = state.m[k];
    Array& v = state.v[k];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    value -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  }
}

template void adam_step(std::span<const ParamBlock<float>>, AdamState<float>&);
template void adam_step(std::span<const ParamBlock<double>>, AdamState<double>&);

}  // namespace fcnbc
