#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fcnbc/field.hpp"

namespace fcnbc {

/// A named, contiguous parameter array and its gradient.
template <typename Scalar>
struct ParamBlock {
  std::string name;
  Scalar* value = nullptr;
  const Scalar* grad = nullptr;
  Index size = 0;
};

template <typename Scalar>
struct AdamState {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  std::int64_t step_count = 0;
  std::vector<Array> m;
  std::vector<Array> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-4;
};

/// Bias-corrected Adam. Moments are created on the first call. A non-finite
/// gradient aborts the step before any parameter changes, naming the block.
template <typename Scalar>
void adam_step(std::span<const ParamBlock<Scalar>> params, AdamState<Scalar>& state);

}  // namespace fcnbc
