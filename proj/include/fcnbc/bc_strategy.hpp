#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "fcnbc/field.hpp"
#include "fcnbc/tensor.hpp"

namespace fcnbc {

/// How the network is told about the walls.
enum class Method {
  implicit,           // padding only
  context,            // extra 0/1 border-mask input channel
  explicit_encoding,  // border pixels overwritten by a physics rule after each prediction
};

enum class ExplicitRule { neumann, periodic_wrap, lodi };

struct LodiParams {
  double c0 = 1.0;
  double dt = 0.25;
  double dx = 0.5;

  double courant() const { return c0 * dt / dx; }
};

struct StrategyConfig {
  Method method = Method::implicit;
  PadKind padding = PadKind::replicate;
  std::optional<ExplicitRule> rule;
  std::optional<LodiParams> lodi;

  void validate() const;
};

std::string_view to_string(Method m);
std::string_view to_string(ExplicitRule r);

/// "implicit+replicate", "context+circular", "explicit:lodi+zero", ...
/// LODI parameters are not part of the string; they come from the dataset.
StrategyConfig parse_strategy(std::string_view text);
std::string to_string(const StrategyConfig& s);

/// 1 on the outermost ring of pixels, 0 inside.
Field2D make_context_mask(Index h, Index w);

/// Zero normal gradient at first order: each edge pixel copies its inward
/// neighbor; corners take the mean of their two (already enforced) edge neighbors.
template <typename Scalar>
Field2<Scalar> enforce_neumann(const Field2<Scalar>& pred);

/// Opposite borders get the same value, the mean of the local interior pixel and
/// the wrapped interior pixel on the other side (columns first, then rows).
template <typename Scalar>
Field2<Scalar> enforce_periodic(const Field2<Scalar>& pred);

/// Upwind one-way advection out of the domain built from the previous frame:
/// border = prev - C (prev - prev_inward); corners average their two wall updates.
template <typename Scalar>
Field2<Scalar> enforce_lodi(const Field2<Scalar>& prev, const Field2<Scalar>& pred, const LodiParams& p);

/// Transposes of the three maps above with respect to `pred` (LODI borders do
/// not depend on pred, so their gradient is dropped).
template <typename Scalar>
Field2<Scalar> enforce_neumann_adjoint(const Field2<Scalar>& grad);
template <typename Scalar>
Field2<Scalar> enforce_periodic_adjoint(const Field2<Scalar>& grad);
template <typename Scalar>
Field2<Scalar> enforce_lodi_adjoint(const Field2<Scalar>& grad);

/// Identity for implicit/context; applies the configured rule per batch item
/// for explicit. `prev_frames` holds one field per batch item and is only
/// required by the LODI rule.
template <typename Scalar>
Tensor<Scalar> apply_strategy(const StrategyConfig& config, const Tensor<Scalar>& raw_pred,
                              std::span<const Field2<Scalar>> prev_frames = {});

template <typename Scalar>
Tensor<Scalar> apply_strategy_adjoint(const StrategyConfig& config, const Tensor<Scalar>& grad);

}  // namespace fcnbc
