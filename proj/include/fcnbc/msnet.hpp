#pragma once

#include <cstdint>
#include <vector>

#include "fcnbc/adam.hpp"
#include "fcnbc/conv.hpp"
#include "fcnbc/tensor.hpp"

namespace fcnbc {

/// One resolution bank: hidden conv widths, one kernel size per layer
/// (hidden layers then the output layer), and a single-channel prediction.
struct BankSpec {
  Index scale_divisor = 1;
  std::vector<Index> layer_channels;
  std::vector<Index> kernel_sizes;
  Index output_channels = 1;

  friend bool operator==(const BankSpec&, const BankSpec&) = default;
};

struct MSNetConfig {
  Index input_frames = 4;
  bool context_channel = false;
  PadKind padding_mode = PadKind::replicate;
  std::vector<BankSpec> banks;
  std::uint64_t seed = 0;

  /// Input channels seen by the network: frames plus the optional border mask.
  Index input_channels() const { return input_frames + (context_channel ? 1 : 0); }

  /// Three banks of kernels (3, 3, 3, 5) and widths (w1, w2, w1).
  static MSNetConfig uniform(Index w1, Index w2, PadKind padding, bool context = false, Index frames = 4);

  /// The ~0.4M-parameter layout used at full scale.
  static MSNetConfig full_scale(PadKind padding, bool context = false) {
    return uniform(64, 112, padding, context);
  }

  void validate() const;
  friend bool operator==(const MSNetConfig&, const MSNetConfig&) = default;
};

/// out * in * k^2 + out summed over every convolution the config describes.
Index parameter_count(const MSNetConfig& config);

/// Forward activations kept for the backward pass.
template <typename Scalar>
struct MSNetTrace {
  Shape4 input_shape;
  Tensor<Scalar> half;                                 // x pooled x2
  std::vector<std::vector<Tensor<Scalar>>> layer_inputs;  // [bank][layer]
  std::vector<Tensor<Scalar>> predictions;             // [bank], coarse to fine
};

template <typename Scalar>
using MSNetGradients = std::vector<std::vector<ConvGrads<Scalar>>>;

/// Three-bank multi-scale network (scales N/4, N/2, N). Each bank is a conv
/// stack with ReLU between layers and a linear output layer; the coarser
/// bank's prediction is upsampled and appended as an input channel of the
/// next finer bank.
template <typename Scalar>
class MSNet {
 public:
  MSNet() = default;

  /// Validates the config and draws weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
  static MSNet build(const MSNetConfig& config);

  const MSNetConfig& config() const { return config_; }
  Index parameter_count() const;

  std::vector<std::vector<ConvSpec<Scalar>>>& banks() { return banks_; }
  const std::vector<std::vector<ConvSpec<Scalar>>>& banks() const { return banks_; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x) const;
  Tensor<Scalar> forward(const Tensor<Scalar>& x, MSNetTrace<Scalar>& trace) const;

  /// Adds parameter gradients into `grads`; writes d(loss)/dx into grad_x when given.
  void backward(const MSNetTrace<Scalar>& trace, const Tensor<Scalar>& grad_y, MSNetGradients<Scalar>& grads,
                Tensor<Scalar>* grad_x = nullptr) const;

  MSNetGradients<Scalar> zero_gradients() const;

  /// Parameter blocks in a fixed order (bank, layer, weight then bias).
  std::vector<ParamBlock<Scalar>> param_blocks(const MSNetGradients<Scalar>& grads);

  bool all_finite() const;

  template <typename S2>
  MSNet<S2> cast() const {
    MSNet<S2> out;
    out.config_ = config_;
    for (const auto& bank : banks_) {
      auto& dst = out.banks_.emplace_back();
      for (const auto& c : bank) {
        ConvSpec<S2> d(c.in_channels, c.out_channels, c.kernel, c.pad_kind);
        d.weights = c.weights.template cast<S2>();
        d.bias = c.bias.template cast<S2>();
        dst.push_back(std::move(d));
      }
    }
    return out;
  }

 private:
  template <typename>
  friend class MSNet;

  Tensor<Scalar> run_bank(std::size_t bank, const Tensor<Scalar>& input, std::vector<Tensor<Scalar>>* inputs) const;
  Tensor<Scalar> backward_bank(std::size_t bank, const std::vector<Tensor<Scalar>>& inputs, Tensor<Scalar> grad,
                               MSNetGradients<Scalar>& grads, bool need_input_grad) const;

  MSNetConfig config_;
  std::vector<std::vector<ConvSpec<Scalar>>> banks_;
};

}  // namespace fcnbc
