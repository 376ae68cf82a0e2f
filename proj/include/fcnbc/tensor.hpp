#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fcnbc/field.hpp"

namespace fcnbc {

struct Shape4 {
  Index n = 0;
  Index c = 0;
  Index h = 0;
  Index w = 0;

  Index size() const { return n * c * h * w; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& s);

/// Batched N x C x H x W array, n-major then c then row-major planes.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using PlaneMap = Eigen::Map<Field2<Scalar>>;
  using ConstPlaneMap = Eigen::Map<const Field2<Scalar>>;

  Tensor() = default;
  explicit Tensor(const Shape4& shape) : shape_(shape), values_(Array::Zero(shape.size())) {}
  Tensor(Index n, Index c, Index h, Index w) : Tensor(Shape4{n, c, h, w}) {}

  static Tensor constant(const Shape4& shape, Scalar value) {
    Tensor t(shape);
    t.values_.setConstant(value);
    return t;
  }

  /// (1, planes.size(), h, w) stacking the given planes as channels.
  template <typename S2>
  static Tensor from_planes(std::span<const Field2<S2>> planes) {
    if (planes.empty()) return Tensor();
    Tensor t(1, static_cast<Index>(planes.size()), planes[0].rows(), planes[0].cols());
    for (std::size_t c = 0; c < planes.size(); ++c) t.plane(0, static_cast<Index>(c)) = planes[c].template cast<Scalar>();
    return t;
  }

  const Shape4& shape() const { return shape_; }
  Index n() const { return shape_.n; }
  Index c() const { return shape_.c; }
  Index h() const { return shape_.h; }
  Index w() const { return shape_.w; }
  Index size() const { return shape_.size(); }

  Array& values() { return values_; }
  const Array& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  Scalar& operator()(Index b, Index ch, Index i, Index j) { return values_[offset(b, ch) + i * shape_.w + j]; }
  Scalar operator()(Index b, Index ch, Index i, Index j) const { return values_[offset(b, ch) + i * shape_.w + j]; }

  PlaneMap plane(Index b, Index ch) { return PlaneMap(data() + offset(b, ch), shape_.h, shape_.w); }
  ConstPlaneMap plane(Index b, Index ch) const { return ConstPlaneMap(data() + offset(b, ch), shape_.h, shape_.w); }

  /// Copy of batch item b as a (1, c, h, w) tensor.
  Tensor item(Index b) const {
    Tensor t(1, shape_.c, shape_.h, shape_.w);
    const Index per = shape_.c * shape_.h * shape_.w;
    t.values_ = values_.segment(b * per, per);
    return t;
  }

  void set_item(Index b, const Tensor& src) {
    const Index per = shape_.c * shape_.h * shape_.w;
    values_.segment(b * per, per) = src.values_;
  }

  template <typename S2>
  Tensor<S2> cast() const {
    Tensor<S2> t(shape_);
    t.values() = values_.template cast<S2>();
    return t;
  }

  bool all_finite() const { return values_.isFinite().all(); }

 private:
  Index offset(Index b, Index ch) const { return (b * shape_.c + ch) * shape_.h * shape_.w; }

  Shape4 shape_;
  Array values_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename Scalar>
Scalar dot(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return (a.values() * b.values()).sum();
}

enum class PadKind { zero, replicate, reflect, circular };

std::string_view to_string(PadKind k);
PadKind parse_pad_kind(std::string_view s);

struct Padding {
  PadKind kind = PadKind::zero;
  Index amount = 0;

  /// Throws ConfigError if `amount` is out of bounds for an h x w input.
  void validate(Index h, Index w) const;
};

/// Source index along one axis for padded position p (may be negative or >= len);
/// -1 means the padded cell is a constant zero.
Index pad_source(Index p, Index len, PadKind kind);

template <typename Scalar>
Tensor<Scalar> pad(const Tensor<Scalar>& x, const Padding& mode);

/// Exact transpose of pad: every padded cell's gradient goes back to its source cell.
template <typename Scalar>
Tensor<Scalar> pad_adjoint(const Tensor<Scalar>& grad_out, const Padding& mode, const Shape4& original);

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x);

/// Gradient mask taken from the forward input (subgradient 0 at x == 0).
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_y);

/// 2x2 average pooling.
template <typename Scalar>
Tensor<Scalar> downsample2(const Tensor<Scalar>& x);

template <typename Scalar>
Tensor<Scalar> downsample2_backward(const Tensor<Scalar>& grad_y);

/// Corner-aligned bilinear interpolation to (2h, 2w).
template <typename Scalar>
Tensor<Scalar> upsample2(const Tensor<Scalar>& x);

template <typename Scalar>
Tensor<Scalar> upsample2_backward(const Tensor<Scalar>& grad_y, const Shape4& original);

template <typename Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>> xs);

template <typename Scalar>
Tensor<Scalar> concat_channels(const std::vector<Tensor<Scalar>>& xs) {
  return concat_channels(std::span<const Tensor<Scalar>>(xs));
}

/// Splits a gradient over a channel concatenation back into its parts.
template <typename Scalar>
std::vector<Tensor<Scalar>> split_channels(const Tensor<Scalar>& grad, std::span<const Index> channels);

/// Toroidal shift of every plane by (di, dj).
template <typename Scalar>
Tensor<Scalar> roll(const Tensor<Scalar>& x, Index di, Index dj);

}  // namespace fcnbc
