#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fcnbc {

using Index = Eigen::Index;

/// One scalar snapshot on an H x W grid, row-major (row = y, column = x).
template <typename Scalar>
using Field2 = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Field2D = Field2<double>;
using Field2F = Field2<float>;

/// Smallest grid edge on which the three-bank network is well defined.
inline constexpr Index kMinGridSize = 8;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input or configuration, detected before any work is done.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or out-of-range numerics at run time.
class NumericError : public Error {
 public:
  using Error::Error;
};

enum class Physics : std::uint8_t { wave = 0, heat = 1 };
enum class BoundaryKind : std::uint8_t { reflecting = 0, periodic = 1, absorbing = 2, adiabatic = 3 };

std::string_view to_string(Physics p);
std::string_view to_string(BoundaryKind b);
Physics parse_physics(std::string_view s);
BoundaryKind parse_boundary(std::string_view s);

/// Adiabatic walls only with heat; the three acoustic regimes only with wave.
bool compatible(Physics p, BoundaryKind b);

/// Gaussian pulse a * exp(-ln2 * r^2 / b^2) with half-width b; all lengths in grid units.
struct PulseSpec {
  double x0 = 0.0;
  double y0 = 0.0;
  double amplitude = 0.0;
  double half_width = 1.0;

  friend bool operator==(const PulseSpec&, const PulseSpec&) = default;
};

/// Throws ConfigError unless half_width > 0 and the center is at least half_width from each wall.
void validate_pulse(const PulseSpec& pulse, Index height, Index width);

/// A stored trajectory. Frames are kept at storage precision (32-bit).
struct SimulationRecord {
  std::vector<Field2F> frames;
  double dx = 1.0;
  double dt_frame = 1.0;
  Physics physics = Physics::wave;
  BoundaryKind bc = BoundaryKind::reflecting;
  double c0_or_alpha = 1.0;
  std::vector<PulseSpec> pulses;
  std::uint64_t seed = 0;

  Index height() const { return frames.empty() ? 0 : frames.front().rows(); }
  Index width() const { return frames.empty() ? 0 : frames.front().cols(); }
  Index frame_count() const { return static_cast<Index>(frames.size()); }

  friend bool operator==(const SimulationRecord& a, const SimulationRecord& b);
};

/// Shape, finiteness and physics/bc checks. `min_frames` is 1 for storage and
/// 5 (one k = 4 window plus a target) for anything that trains on the record.
void validate_record(const SimulationRecord& record, Index min_frames = 1);

/// Input frames [t, t + k) and the target frame t + k, copied out of the record.
struct Window {
  std::vector<Field2F> inputs;
  Field2F target;
};

Window sample_window(const SimulationRecord& record, Index t, Index k);

/// Number of distinct (t, k) windows a record provides.
inline Index window_count(const SimulationRecord& record, Index k) {
  return std::max<Index>(0, record.frame_count() - k);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.derived().array().isFinite().all();
}

}  // namespace fcnbc
