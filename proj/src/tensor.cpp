#include "fcnbc/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace fcnbc {

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + ", " + std::to_string(s.c) + ", " + std::to_string(s.h) + ", " +
         std::to_string(s.w) + ")";
}

std::string_view to_string(PadKind k) {
  switch (k) {
    case PadKind::zero: return "zero";
    case PadKind::replicate: return "replicate";
    case PadKind::reflect: return "reflect";
    case PadKind::circular: return "circular";
  }
  return "unknown";
}

PadKind parse_pad_kind(std::string_view s) {
  if (s == "zero" || s == "zeros") return PadKind::zero;
  if (s == "replicate") return PadKind::replicate;
  if (s == "reflect") return PadKind::reflect;
  if (s == "circular") return PadKind::circular;
  throw ConfigError("unknown padding mode '" + std::string(s) + "'");
}

void Padding::validate(Index h, Index w) const {
  if (amount < 0) throw ConfigError("padding amount must be non-negative");
  const Index m = std::min(h, w);
  if (kind == PadKind::reflect && amount > m - 1) {
    throw ConfigError("reflect padding of " + std::to_string(amount) + " needs at least " +
                      std::to_string(amount + 1) + " cells per axis");
  }
  if ((kind == PadKind::replicate || kind == PadKind::circular) && amount > m) {
    throw ConfigError(std::string(to_string(kind)) + " padding of " + std::to_string(amount) +
                      " exceeds the smallest axis (" + std::to_string(m) + ")");
  }
}

Index pad_source(Index p, Index len, PadKind kind) {
  if (p >= 0 && p < len) return p;
  switch (kind) {
    case PadKind::zero: return -1;
    case PadKind::replicate: return p < 0 ? 0 : len - 1;
    case PadKind::reflect: return p < 0 ? -p : 2 * (len - 1) - p;
    case PadKind::circular: return ((p % len) + len) % len;
  }
  return -1;
}

namespace {

struct PadTables {
  std::vector<Index> rows;
  std::vector<Index> cols;
};

PadTables pad_tables(Index h, Index w, const Padding& mode) {
  PadTables t;
  const Index a = mode.amount;
  t.rows.resize(static_cast<std::size_t>(h + 2 * a));
  t.cols.resize(static_cast<std::size_t>(w + 2 * a));
  for (Index i = 0; i < h + 2 * a; ++i) t.rows[static_cast<std::size_t>(i)] = pad_source(i - a, h, mode.kind);
  for (Index j = 0; j < w + 2 * a; ++j) t.cols[static_cast<std::size_t>(j)] = pad_source(j - a, w, mode.kind);
  return t;
}

/// Visits every column of a padded row of width w + 2a, or only the two side bands
/// when the row is an interior one.
template <typename F>
void for_border_columns(bool edge_row, Index a, Index w, F&& f) {
  if (edge_row) {
    for (Index j = 0; j < w + 2 * a; ++j) f(j);
    return;
  }
  for (Index j = 0; j < a; ++j) f(j);
  for (Index j = a + w; j < w + 2 * a; ++j) f(j);
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> pad(const Tensor<Scalar>& x, const Padding& mode) {
  mode.validate(x.h(), x.w());
  const Index a = mode.amount;
  const Index ph = x.h() + 2 * a;
  const Index pw = x.w() + 2 * a;
  Tensor<Scalar> out(x.n(), x.c(), ph, pw);
  const PadTables t = pad_tables(x.h(), x.w(), mode);
  for (Index b = 0; b < x.n(); ++b) {
    for (Index c = 0; c < x.c(); ++c) {
      auto src = x.plane(b, c);
      auto dst = out.plane(b, c);
      dst.block(a, a, x.h(), x.w()) = src;
      for (Index i = 0; i < ph; ++i) {
        const Index si = t.rows[static_cast<std::size_t>(i)];
        const bool edge_row = i < a || i >= a + x.h();
        for_border_columns(edge_row, a, x.w(), [&](Index j) {
          const Index sj = t.cols[static_cast<std::size_t>(j)];
          dst(i, j) = (si < 0 || sj < 0) ? Scalar(0) : src(si, sj);
        });
      }
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> pad_adjoint(const Tensor<Scalar>& grad_out, const Padding& mode, const Shape4& original) {
  const Index a = mode.amount;
  const Shape4 expected{original.n, original.c, original.h + 2 * a, original.w + 2 * a};
  if (grad_out.shape() != expected) {
    throw ConfigError("pad_adjoint: gradient shape " + to_string(grad_out.shape()) + " does not match padded shape " +
                      to_string(expected));
  }
  mode.validate(original.h, original.w);
  Tensor<Scalar> g(original);
  const PadTables t = pad_tables(original.h, original.w, mode);
  for (Index b = 0; b < original.n; ++b) {
    for (Index c = 0; c < original.c; ++c) {
      auto src = grad_out.plane(b, c);
      auto dst = g.plane(b, c);
      dst = src.block(a, a, original.h, original.w);
      for (Index i = 0; i < expected.h; ++i) {
        const Index si = t.rows[static_cast<std::size_t>(i)];
        const bool edge_row = i < a || i >= a + original.h;
        for_border_columns(edge_row, a, original.w, [&](Index j) {
          const Index sj = t.cols[static_cast<std::size_t>(j)];
          if (si >= 0 && sj >= 0) dst(si, sj) += src(i, j);
        });
      }
    }
  }
  return g;
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.shape());
  y.values() = x.values().max(Scalar(0));
  return y;
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_y) {
  if (x.shape() != grad_y.shape()) throw ConfigError("relu_backward: shape mismatch");
  Tensor<Scalar> g(x.shape());
  g.values() = (x.values() > Scalar(0)).select(grad_y.values(), Scalar(0));
  return g;
}

template <typename Scalar>
Tensor<Scalar> downsample2(const Tensor<Scalar>& x) {
  if (x.h() % 2 != 0 || x.w() % 2 != 0) {
    throw ConfigError("downsample2 needs even spatial dimensions, got " + to_string(x.shape()));
  }
  const Index h = x.h() / 2;
  const Index w = x.w() / 2;
  Tensor<Scalar> y(x.n(), x.c(), h, w);
  for (Index b = 0; b < x.n(); ++b) {
    for (Index c = 0; c < x.c(); ++c) {
      auto src = x.plane(b, c);
      auto dst = y.plane(b, c);
      for (Index i = 0; i < h; ++i) {
        for (Index j = 0; j < w; ++j) {
          dst(i, j) = Scalar(0.25) * (src(2 * i, 2 * j) + src(2 * i, 2 * j + 1) + src(2 * i + 1, 2 * j) +
                                      src(2 * i + 1, 2 * j + 1));
        }
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> downsample2_backward(const Tensor<Scalar>& grad_y) {
  Tensor<Scalar> g(grad_y.n(), grad_y.c(), 2 * grad_y.h(), 2 * grad_y.w());
  for (Index b = 0; b < grad_y.n(); ++b) {
    for (Index c = 0; c < grad_y.c(); ++c) {
      auto src = grad_y.plane(b, c);
      auto dst = g.plane(b, c);
      for (Index i = 0; i < dst.rows(); ++i) {
        for (Index j = 0; j < dst.cols(); ++j) dst(i, j) = Scalar(0.25) * src(i / 2, j / 2);
      }
    }
  }
  return g;
}

namespace {

struct LerpEntry {
  Index lo;
  Index hi;
  double frac;
};

/// Corner-aligned sampling positions: output u maps to u (len - 1) / (2 len - 1).
std::vector<LerpEntry> upsample_table(Index len) {
  const Index out = 2 * len;
  std::vector<LerpEntry> t(static_cast<std::size_t>(out));
  for (Index u = 0; u < out; ++u) {
    const double src = len > 1 ? static_cast<double>(u) * static_cast<double>(len - 1) / static_cast<double>(out - 1)
                               : 0.0;
    Index lo = std::min<Index>(static_cast<Index>(std::floor(src)), len - 1);
    const Index hi = std::min<Index>(lo + 1, len - 1);
    t[static_cast<std::size_t>(u)] = {lo, hi, src - static_cast<double>(lo)};
  }
  return t;
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> upsample2(const Tensor<Scalar>& x) {
  const auto rt = upsample_table(x.h());
  const auto ct = upsample_table(x.w());
  Tensor<Scalar> y(x.n(), x.c(), 2 * x.h(), 2 * x.w());
  Field2<Scalar> rows(2 * x.h(), x.w());
  for (Index b = 0; b < x.n(); ++b) {
    for (Index c = 0; c < x.c(); ++c) {
      auto src = x.plane(b, c);
      for (Index u = 0; u < rows.rows(); ++u) {
        const auto& e = rt[static_cast<std::size_t>(u)];
        const Scalar f = static_cast<Scalar>(e.frac);
        rows.row(u) = (Scalar(1) - f) * src.row(e.lo) + f * src.row(e.hi);
      }
      auto dst = y.plane(b, c);
      for (Index v = 0; v < dst.cols(); ++v) {
        const auto& e = ct[static_cast<std::size_t>(v)];
        const Scalar f = static_cast<Scalar>(e.frac);
        dst.col(v) = (Scalar(1) - f) * rows.col(e.lo) + f * rows.col(e.hi);
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> upsample2_backward(const Tensor<Scalar>& grad_y, const Shape4& original) {
  if (grad_y.shape() != Shape4{original.n, original.c, 2 * original.h, 2 * original.w}) {
    throw ConfigError("upsample2_backward: gradient shape " + to_string(grad_y.shape()) + " does not match");
  }
  const auto rt = upsample_table(original.h);
  const auto ct = upsample_table(original.w);
  Tensor<Scalar> g(original);
  Field2<Scalar> rows(2 * original.h, original.w);
  for (Index b = 0; b < original.n; ++b) {
    for (Index c = 0; c < original.c; ++c) {
      auto src = grad_y.plane(b, c);
      rows.setZero();
      for (Index v = 0; v < src.cols(); ++v) {
        const auto& e = ct[static_cast<std::size_t>(v)];
        const Scalar f = static_cast<Scalar>(e.frac);
        rows.col(e.lo) += (Scalar(1) - f) * src.col(v);
        rows.col(e.hi) += f * src.col(v);
      }
      auto dst = g.plane(b, c);
      for (Index u = 0; u < rows.rows(); ++u) {
        const auto& e = rt[static_cast<std::size_t>(u)];
        const Scalar f = static_cast<Scalar>(e.frac);
        dst.row(e.lo) += (Scalar(1) - f) * rows.row(u);
        dst.row(e.hi) += f * rows.row(u);
      }
    }
  }
  return g;
}

template <typename Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>> xs) {
  if (xs.empty()) throw ConfigError("concat_channels needs at least one input");
  Index channels = 0;
  for (const auto& x : xs) {
    if (x.n() != xs[0].n() || x.h() != xs[0].h() || x.w() != xs[0].w()) {
      throw ConfigError("concat_channels: spatial/batch mismatch " + to_string(x.shape()) + " vs " +
                        to_string(xs[0].shape()));
    }
    channels += x.c();
  }
  Tensor<Scalar> y(xs[0].n(), channels, xs[0].h(), xs[0].w());
  const Index plane = xs[0].h() * xs[0].w();
  for (Index b = 0; b < y.n(); ++b) {
    Index offset = (b * channels) * plane;
    for (const auto& x : xs) {
      const Index len = x.c() * plane;
      y.values().segment(offset, len) = x.values().segment(b * len, len);
      offset += len;
    }
  }
  return y;
}

template <typename Scalar>
std::vector<Tensor<Scalar>> split_channels(const Tensor<Scalar>& grad, std::span<const Index> channels) {
  Index total = 0;
  for (Index c : channels) total += c;
  if (total != grad.c()) throw ConfigError("split_channels: channel counts do not sum to " + std::to_string(grad.c()));
  const Index plane = grad.h() * grad.w();
  std::vector<Tensor<Scalar>> parts;
  for (Index c : channels) parts.emplace_back(grad.n(), c, grad.h(), grad.w());
  for (Index b = 0; b < grad.n(); ++b) {
    Index offset = b * grad.c() * plane;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const Index len = channels[k] * plane;
      parts[k].values().segment(b * len, len) = grad.values().segment(offset, len);
      offset += len;
    }
  }
  return parts;
}

template <typename Scalar>
Tensor<Scalar> roll(const Tensor<Scalar>& x, Index di, Index dj) {
  Tensor<Scalar> y(x.shape());
  const Index h = x.h();
  const Index w = x.w();
  for (Index b = 0; b < x.n(); ++b) {
    for (Index c = 0; c < x.c(); ++c) {
      auto src = x.plane(b, c);
      auto dst = y.plane(b, c);
      for (Index i = 0; i < h; ++i) {
        for (Index j = 0; j < w; ++j) dst(((i + di) % h + h) % h, ((j + dj) % w + w) % w) = src(i, j);
      }
    }
  }
  return y;
}

#define FCNBC_INSTANTIATE(S)                                                                                    \
  template Tensor<S> pad(const Tensor<S>&, const Padding&);                                                     \
  template Tensor<S> pad_adjoint(const Tensor<S>&, const Padding&, const Shape4&);                              \
  template Tensor<S> relu(const Tensor<S>&);                                                                    \
  template Tensor<S> relu_backward(const Tensor<S>&, const Tensor<S>&);                                         \
  template Tensor<S> downsample2(const Tensor<S>&);                                                             \
  template Tensor<S> downsample2_backward(const Tensor<S>&);                                                    \
  template Tensor<S> upsample2(const Tensor<S>&);                                                               \
  template Tensor<S> upsample2_backward(const Tensor<S>&, const Shape4&);                                       \
  template Tensor<S> concat_channels(std::span<const Tensor<S>>);                                               \
  template std::vector<Tensor<S>> split_channels(const Tensor<S>&, std::span<const Index>);                     \
  template Tensor<S> roll(const Tensor<S>&, Index, Index);

FCNBC_INSTANTIATE(float)
FCNBC_INSTANTIATE(double)
#undef FCNBC_INSTANTIATE

}  // namespace fcnbc
