#include "fcnbc/conv.hpp"

#include <algorithm>
#include <vector>

namespace fcnbc {

template <typename Scalar>
ConvSpec<Scalar>::ConvSpec(Index in, Index out, Index k, PadKind pk)
    : in_channels(in),
      out_channels(out),
      kernel(k),
      pad_kind(pk),
      weights(RowMatrix<Scalar>::Zero(out, in * k * k)),
      bias(Vector<Scalar>::Zero(out)) {
  if (in < 1 || out < 1) throw ConfigError("convolution channel counts must be positive");
  if (k < 1 || k % 2 == 0) throw ConfigError("convolution kernel size must be odd and positive");
}

namespace {

template <typename Scalar>
void check_input(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec) {
  if (x.c() != spec.in_channels) {
    throw ConfigError("conv2d: input has " + std::to_string(x.c()) + " channels, layer expects " +
                      std::to_string(spec.in_channels));
  }
}

// Planes are processed in "padded-width" flat layout: output pixel (i, j) sits
// at n = i * pw + j, so tap (ki, kj) reads the padded input at n + ki * pw + kj.
// Columns j >= w of that layout are scratch.

template <int K, typename Scalar>
void correlate_fixed(Scalar* __restrict out, const Scalar* __restrict in, const Scalar* __restrict wk, Index len,
                     Index pw) {
  Scalar wt[K * K];
  for (int t = 0; t < K * K; ++t) wt[t] = wk[t];
  for (Index n = 0; n < len; ++n) {
    Scalar acc = out[n];
    for (int ki = 0; ki < K; ++ki) {
      for (int kj = 0; kj < K; ++kj) acc += wt[ki * K + kj] * in[n + ki * pw + kj];
    }
    out[n] = acc;
  }
}

template <typename Scalar>
void correlate_any(Scalar* out, const Scalar* in, const Scalar* wk, Index k, Index len, Index pw) {
  for (Index ki = 0; ki < k; ++ki) {
    for (Index kj = 0; kj < k; ++kj) {
      const Scalar wt = wk[ki * k + kj];
      const Scalar* src = in + ki * pw + kj;
      for (Index n = 0; n < len; ++n) out[n] += wt * src[n];
    }
  }
}

/// out[n] += sum over taps of wk[t] * in[n + off(t)], n in [0, len).
template <typename Scalar>
void correlate(Scalar* out, const Scalar* in, const Scalar* wk, Index k, Index len, Index pw) {
  switch (k) {
    case 1: correlate_fixed<1>(out, in, wk, len, pw); break;
    case 3: correlate_fixed<3>(out, in, wk, len, pw); break;
    case 5: correlate_fixed<5>(out, in, wk, len, pw); break;
    default: correlate_any(out, in, wk, k, len, pw); break;
  }
}

/// Reverses the kernel so that the transpose of `correlate` is again a correlation.
template <typename Scalar>
void flipped(const Scalar* wk, Index k, Scalar* out) {
  for (Index t = 0; t < k * k; ++t) out[t] = wk[k * k - 1 - t];
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec) {
  check_input(x, spec);
  const Tensor<Scalar> padded = pad(x, spec.padding());
  const Index h = x.h();
  const Index w = x.w();
  const Index k = spec.kernel;
  const Index pw = padded.w();
  const Index len = (h - 1) * pw + w;
  Tensor<Scalar> y(x.n(), spec.out_channels, h, w);
  std::vector<Scalar> acc(static_cast<std::size_t>(h * pw));
  for (Index b = 0; b < x.n(); ++b) {
    for (Index o = 0; o < spec.out_channels; ++o) {
      std::fill(acc.begin(), acc.end(), spec.bias[o]);
      for (Index c = 0; c < spec.in_channels; ++c) {
        correlate(acc.data(), padded.plane(b, c).data(), &spec.weights(o, c * k * k), k, len, pw);
      }
      auto dst = y.plane(b, o);
      for (Index i = 0; i < h; ++i) {
        dst.row(i) = Eigen::Map<const Eigen::Array<Scalar, 1, Eigen::Dynamic>>(acc.data() + i * pw, w);
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> conv2d_direct(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec) {
  check_input(x, spec);
  const Tensor<Scalar> padded = pad(x, spec.padding());
  const Index k = spec.kernel;
  Tensor<Scalar> y(x.n(), spec.out_channels, x.h(), x.w());
  for (Index b = 0; b < x.n(); ++b) {
    for (Index o = 0; o < spec.out_channels; ++o) {
      for (Index i = 0; i < x.h(); ++i) {
        for (Index j = 0; j < x.w(); ++j) {
          Scalar acc = spec.bias[o];
          for (Index c = 0; c < spec.in_channels; ++c) {
            for (Index ki = 0; ki < k; ++ki) {
              for (Index kj = 0; kj < k; ++kj) acc += spec.weight(o, c, ki, kj) * padded(b, c, i + ki, j + kj);
            }
          }
          y(b, o, i, j) = acc;
        }
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> conv2d_backward(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec, const Tensor<Scalar>& grad_y,
                               ConvGrads<Scalar>& grads, bool need_grad_x) {
  check_input(x, spec);
  if (grad_y.shape() != Shape4{x.n(), spec.out_channels, x.h(), x.w()}) {
    throw ConfigError("conv2d_backward: gradient shape " + to_string(grad_y.shape()) + " does not match output");
  }
  const Padding mode = spec.padding();
  const Tensor<Scalar> padded = pad(x, mode);
  const Index h = x.h();
  const Index w = x.w();
  const Index k = spec.kernel;
  const Index kk = k * k;
  const Index ph = padded.h();
  const Index pw = padded.w();
  const Index len = (h - 1) * pw + w;
  // Gradient planes in padded-width layout, preceded by `shift` zeros so the
  // transposed correlation can read before the first output pixel.
  const Index shift = (k - 1) * pw + (k - 1);
  const Index glen = shift + ph * pw;
  std::vector<Scalar> gz(static_cast<std::size_t>(spec.out_channels * glen), Scalar(0));
  std::vector<Scalar> wflip(static_cast<std::size_t>(kk));
  Tensor<Scalar> grad_padded;
  if (need_grad_x) grad_padded = Tensor<Scalar>(padded.shape());

  using ConstVec = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
  for (Index b = 0; b < x.n(); ++b) {
    for (Index o = 0; o < spec.out_channels; ++o) {
      Scalar* g = gz.data() + o * glen + shift;
      const auto src = grad_y.plane(b, o);
      for (Index i = 0; i < h; ++i) {
        Eigen::Map<Eigen::Array<Scalar, 1, Eigen::Dynamic>>(g + i * pw, w) = src.row(i);
      }
      grads.bias[o] += src.sum();
    }
    for (Index c = 0; c < spec.in_channels; ++c) {
      const Scalar* p = padded.plane(b, c).data();
      for (Index o = 0; o < spec.out_channels; ++o) {
        const ConstVec g(gz.data() + o * glen + shift, len);
        Scalar* gw = &grads.weights(o, c * kk);
        for (Index ki = 0; ki < k; ++ki) {
          for (Index kj = 0; kj < k; ++kj) gw[ki * k + kj] += g.dot(ConstVec(p + ki * pw + kj, len));
        }
      }
      if (need_grad_x) {
        Scalar* gp = grad_padded.plane(b, c).data();
        for (Index o = 0; o < spec.out_channels; ++o) {
          flipped(&spec.weights(o, c * kk), k, wflip.data());
          correlate(gp, gz.data() + o * glen, wflip.data(), k, ph * pw, pw);
        }
      }
    }
  }
  if (!need_grad_x) return Tensor<Scalar>();
  return pad_adjoint(grad_padded, mode, x.shape());
}

template struct ConvSpec<float>;
template struct ConvSpec<double>;
template Tensor<float> conv2d(const Tensor<float>&, const ConvSpec<float>&);
template Tensor<double> conv2d(const Tensor<double>&, const ConvSpec<double>&);
template Tensor<float> conv2d_direct(const Tensor<float>&, const ConvSpec<float>&);
template Tensor<double> conv2d_direct(const Tensor<double>&, const ConvSpec<double>&);
template Tensor<float> conv2d_backward(const Tensor<float>&, const ConvSpec<float>&, const Tensor<float>&,
                                       ConvGrads<float>&, bool);
template Tensor<double> conv2d_backward(const Tensor<double>&, const ConvSpec<double>&, const Tensor<double>&,
                                        ConvGrads<double>&, bool);

}  // namespace fcnbc
