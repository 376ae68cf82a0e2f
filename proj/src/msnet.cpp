#include "fcnbc/msnet.hpp"

#include <cmath>
#include <random>

namespace fcnbc {

namespace {

constexpr Index kBankDivisors[3] = {4, 2, 1};

Index bank_input_channels(const MSNetConfig& config, std::size_t bank) {
  return config.input_channels() + (bank == 0 ? 0 : 1);
}

}  // namespace

MSNetConfig MSNetConfig::uniform(Index w1, Index w2, PadKind padding, bool context, Index frames) {
  MSNetConfig c;
  c.input_frames = frames;
  c.context_channel = context;
  c.padding_mode = padding;
  for (Index d : kBankDivisors) c.banks.push_back(BankSpec{d, {w1, w2, w1}, {3, 3, 3, 5}, 1});
  return c;
}

void MSNetConfig::validate() const {
  if (input_frames < 1) throw ConfigError("input_frames must be >= 1");
  if (banks.size() != 3) throw ConfigError("the multi-scale network has exactly 3 banks, got " + std::to_string(banks.size()));
  for (std::size_t b = 0; b < banks.size(); ++b) {
    const auto& bank = banks[b];
    const std::string where = "bank " + std::to_string(b) + ": ";
    if (bank.scale_divisor != kBankDivisors[b]) {
      throw ConfigError(where + "scale divisor must be " + std::to_string(kBankDivisors[b]));
    }
    if (bank.output_channels != 1) throw ConfigError(where + "final layer must output exactly 1 channel");
    if (bank.kernel_sizes.size() != bank.layer_channels.size() + 1) {
      throw ConfigError(where + "need one kernel size per hidden layer plus one for the output layer");
    }
    for (Index c : bank.layer_channels) {
      if (c < 1) throw ConfigError(where + "layer widths must be positive");
    }
    for (Index k : bank.kernel_sizes) {
      if (k < 1 || k % 2 == 0) throw ConfigError(where + "kernel sizes must be odd and positive");
    }
  }
}

Index parameter_count(const MSNetConfig& config) {
  Index total = 0;
  for (std::size_t b = 0; b < config.banks.size(); ++b) {
    const auto& bank = config.banks[b];
    Index in = bank_input_channels(config, b);
    for (std::size_t l = 0; l < bank.kernel_sizes.size(); ++l) {
      const Index out = l < bank.layer_channels.size() ? bank.layer_channels[l] : bank.output_channels;
      const Index k = bank.kernel_sizes[l];
      total += out * in * k * k + out;
      in = out;
    }
  }
  return total;
}

template <typename Scalar>
MSNet<Scalar> MSNet<Scalar>::build(const MSNetConfig& config) {
  config.validate();
  MSNet net;
  net.config_ = config;
  std::mt19937_64 rng(config.seed);
  for (std::size_t b = 0; b < config.banks.size(); ++b) {
    const auto& bank = config.banks[b];
    auto& layers = net.banks_.emplace_back();
    Index in = bank_input_channels(config, b);
    for (std::size_t l = 0; l < bank.kernel_sizes.size(); ++l) {
      const Index out = l < bank.layer_channels.size() ? bank.layer_channels[l] : bank.output_channels;
      ConvSpec<Scalar> conv(in, out, bank.kernel_sizes[l], config.padding_mode);
      const double bound = std::sqrt(1.0 / static_cast<double>(in * conv.kernel * conv.kernel));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Index i = 0; i < conv.weights.size(); ++i) conv.weights.data()[i] = static_cast<Scalar>(dist(rng));
      layers.push_back(std::move(conv));
      in = out;
    }
  }
  return net;
}

template <typename Scalar>
Index MSNet<Scalar>::parameter_count() const {
  Index total = 0;
  for (const auto& bank : banks_) {
    for (const auto& c : bank) total += c.parameter_count();
  }
  return total;
}

template <typename Scalar>
Tensor<Scalar> MSNet<Scalar>::run_bank(std::size_t bank, const Tensor<Scalar>& input,
                                       std::vector<Tensor<Scalar>>* inputs) const {
  const auto& layers = banks_[bank];
  Tensor<Scalar> h = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (inputs) inputs->push_back(h);
    h = conv2d(h, layers[l]);
    if (l + 1 < layers.size()) h = relu(h);
  }
  return h;
}

template <typename Scalar>
Tensor<Scalar> MSNet<Scalar>::forward(const Tensor<Scalar>& x) const {
  MSNetTrace<Scalar> unused;
  return forward(x, unused);
}

template <typename Scalar>
Tensor<Scalar> MSNet<Scalar>::forward(const Tensor<Scalar>& x, MSNetTrace<Scalar>& trace) const {
  if (banks_.size() != 3) throw ConfigError("network has not been built");
  if (x.h() % 4 != 0 || x.w() % 4 != 0) {
    throw ConfigError("input spatial size " + std::to_string(x.h()) + "x" + std::to_string(x.w()) +
                      " must be divisible by 4");
  }
  if (x.c() != config_.input_channels()) {
    throw ConfigError("input has " + std::to_string(x.c()) + " channels, network expects " +
                      std::to_string(config_.input_channels()));
  }
  trace.input_shape = x.shape();
  trace.layer_inputs.assign(3, {});
  trace.predictions.clear();

  trace.half = downsample2(x);
  const Tensor<Scalar> quarter = downsample2(trace.half);
  Tensor<Scalar> coarse = run_bank(0, quarter, &trace.layer_inputs[0]);
  Tensor<Scalar> mid = run_bank(1, concat_channels<Scalar>({trace.half, upsample2(coarse)}), &trace.layer_inputs[1]);
  Tensor<Scalar> fine = run_bank(2, concat_channels<Scalar>({x, upsample2(mid)}), &trace.layer_inputs[2]);
  trace.predictions = {std::move(coarse), std::move(mid), fine};
  return fine;
}

template <typename Scalar>
Tensor<Scalar> MSNet<Scalar>::backward_bank(std::size_t bank, const std::vector<Tensor<Scalar>>& inputs,
                                            Tensor<Scalar> grad, MSNetGradients<Scalar>& grads,
                                            bool need_input_grad) const {
  const auto& layers = banks_[bank];
  for (std::size_t l = layers.size(); l-- > 0;) {
    // The ReLU output of layer l is the stored input of layer l + 1.
    if (l + 1 < layers.size()) grad = relu_backward(inputs[l + 1], grad);
    grad = conv2d_backward(inputs[l], layers[l], grad, grads[bank][l], l > 0 || need_input_grad);
  }
  return grad;
}

template <typename Scalar>
void MSNet<Scalar>::backward(const MSNetTrace<Scalar>& trace, const Tensor<Scalar>& grad_y,
                             MSNetGradients<Scalar>& grads, Tensor<Scalar>* grad_x) const {
  const Shape4& xs = trace.input_shape;
  if (grad_y.shape() != Shape4{xs.n, 1, xs.h, xs.w}) {
    throw ConfigError("backward: gradient shape " + to_string(grad_y.shape()) + " does not match output");
  }
  if (grads.size() != banks_.size()) grads = zero_gradients();
  const bool want_x = grad_x != nullptr;
  const Index cin = config_.input_channels();
  const std::vector<Index> parts{cin, 1};

  Tensor<Scalar> g_fine_in = backward_bank(2, trace.layer_inputs[2], grad_y, grads, true);
  auto fine_parts = split_channels(g_fine_in, parts);
  Tensor<Scalar> g_mid_out = upsample2_backward(fine_parts[1], trace.predictions[1].shape());

  Tensor<Scalar> g_mid_in = backward_bank(1, trace.layer_inputs[1], std::move(g_mid_out), grads, true);
  auto mid_parts = split_channels(g_mid_in, parts);
  Tensor<Scalar> g_coarse_out = upsample2_backward(mid_parts[1], trace.predictions[0].shape());

  Tensor<Scalar> g_quarter = backward_bank(0, trace.layer_inputs[0], std::move(g_coarse_out), grads, want_x);
  if (!want_x) return;

  Tensor<Scalar> g_half = mid_parts[0];
  g_half.values() += downsample2_backward(g_quarter).values();
  Tensor<Scalar> gx = fine_parts[0];
  gx.values() += downsample2_backward(g_half).values();
  *grad_x = std::move(gx);
}

template <typename Scalar>
MSNetGradients<Scalar> MSNet<Scalar>::zero_gradients() const {
  MSNetGradients<Scalar> g;
  for (const auto& bank : banks_) {
    auto& gb = g.emplace_back();
    for (const auto& c : bank) gb.push_back(ConvGrads<Scalar>::zeros_like(c));
  }
  return g;
}

template <typename Scalar>
std::vector<ParamBlock<Scalar>> MSNet<Scalar>::param_blocks(const MSNetGradients<Scalar>& grads) {
  std::vector<ParamBlock<Scalar>> blocks;
  for (std::size_t b = 0; b < banks_.size(); ++b) {
    for (std::size_t l = 0; l < banks_[b].size(); ++l) {
      auto& c = banks_[b][l];
      const auto& g = grads.at(b).at(l);
      const std::string prefix = "bank" + std::to_string(b) + ".conv" + std::to_string(l);
      blocks.push_back({prefix + ".weight", c.weights.data(), g.weights.data(), c.weights.size()});
      blocks.push_back({prefix + ".bias", c.bias.data(), g.bias.data(), c.bias.size()});
    }
  }
  return blocks;
}

template <typename Scalar>
bool MSNet<Scalar>::all_finite() const {
  for (const auto& bank : banks_) {
    for (const auto& c : bank) {
      if (!c.weights.allFinite() || !c.bias.allFinite()) return false;
    }
  }
  return true;
}

template class MSNet<float>;
template class MSNet<double>;

}  // namespace fcnbc
