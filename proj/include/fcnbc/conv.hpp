#pragma once

#include "fcnbc/tensor.hpp"

namespace fcnbc {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Stride-1 "same" convolution: weights are (out, in * k * k) with the
/// in-channel index slowest, then kernel row, then kernel column.
template <typename Scalar>
struct ConvSpec {
  Index in_channels = 1;
  Index out_channels = 1;
  Index kernel = 3;
  PadKind pad_kind = PadKind::zero;
  RowMatrix<Scalar> weights;
  Vector<Scalar> bias;

  ConvSpec() = default;
  ConvSpec(Index in, Index out, Index k, PadKind pk);

  Padding padding() const { return Padding{pad_kind, (kernel - 1) / 2}; }
  Index parameter_count() const { return out_channels * in_channels * kernel * kernel + out_channels; }
  Scalar& weight(Index o, Index i, Index ki, Index kj) { return weights(o, (i * kernel + ki) * kernel + kj); }
  Scalar weight(Index o, Index i, Index ki, Index kj) const { return weights(o, (i * kernel + ki) * kernel + kj); }
};

template <typename Scalar>
struct ConvGrads {
  RowMatrix<Scalar> weights;
  Vector<Scalar> bias;

  static ConvGrads zeros_like(const ConvSpec<Scalar>& spec) {
    return {RowMatrix<Scalar>::Zero(spec.weights.rows(), spec.weights.cols()), Vector<Scalar>::Zero(spec.bias.size())};
  }
};

/// Fast path: shifted correlations over a padded plane, one kernel tap at a time.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec);

/// Naive loop path; reference for conv2d.
template <typename Scalar>
Tensor<Scalar> conv2d_direct(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec);

/// Adds the parameter gradients into `grads` and returns grad_x (empty tensor
/// when need_grad_x is false).
template <typename Scalar>
Tensor<Scalar> conv2d_backward(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec, const Tensor<Scalar>& grad_y,
                               ConvGrads<Scalar>& grads, bool need_grad_x = true);

template <typename Scalar>
struct ConvBackward {
  Tensor<Scalar> grad_x;
  ConvGrads<Scalar> grads;
};

template <typename Scalar>
ConvBackward<Scalar> conv2d_backward(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec,
                                     const Tensor<Scalar>& grad_y) {
  ConvBackward<Scalar> out{Tensor<Scalar>(), ConvGrads<Scalar>::zeros_like(spec)};
  out.grad_x = conv2d_backward(x, spec, grad_y, out.grads, true);
  return out;
}

}  // namespace fcnbc
