#include "fcnbc/field.hpp"

#include <cmath>
#include <cstring>

namespace fcnbc {

std::string_view to_string(Physics p) {
  switch (p) {
    case Physics::wave: return "wave";
    case Physics::heat: return "heat";
  }
  return "unknown";
}

std::string_view to_string(BoundaryKind b) {
  switch (b) {
    case BoundaryKind::reflecting: return "reflecting";
    case BoundaryKind::periodic: return "periodic";
    case BoundaryKind::absorbing: return "absorbing";
    case BoundaryKind::adiabatic: return "adiabatic";
  }
  return "unknown";
}

Physics parse_physics(std::string_view s) {
  if (s == "wave") return Physics::wave;
  if (s == "heat") return Physics::heat;
  throw ConfigError("unknown physics '" + std::string(s) + "' (expected wave or heat)");
}

BoundaryKind parse_boundary(std::string_view s) {
  if (s == "reflecting") return BoundaryKind::reflecting;
  if (s == "periodic") return BoundaryKind::periodic;
  if (s == "absorbing") return BoundaryKind::absorbing;
  if (s == "adiabatic") return BoundaryKind::adiabatic;
  throw ConfigError("unknown boundary condition '" + std::string(s) + "'");
}

bool compatible(Physics p, BoundaryKind b) {
  if (p == Physics::heat) return b == BoundaryKind::adiabatic;
  return b != BoundaryKind::adiabatic;
}

void validate_pulse(const PulseSpec& pulse, Index height, Index width) {
  if (!(pulse.half_width > 0.0) || !std::isfinite(pulse.half_width)) {
    throw ConfigError("pulse half_width must be positive");
  }
  if (!std::isfinite(pulse.amplitude)) throw ConfigError("pulse amplitude must be finite");
  const double b = pulse.half_width;
  const bool inside = pulse.x0 >= b && pulse.x0 <= static_cast<double>(width - 1) - b &&
                      pulse.y0 >= b && pulse.y0 <= static_cast<double>(height - 1) - b;
  if (!inside) {
    throw ConfigError("pulse center (" + std::to_string(pulse.x0) + ", " + std::to_string(pulse.y0) +
                      ") is closer than half_width to a wall");
  }
}

bool operator==(const SimulationRecord& a, const SimulationRecord& b) {
  if (a.dx != b.dx || a.dt_frame != b.dt_frame || a.physics != b.physics || a.bc != b.bc ||
      a.c0_or_alpha != b.c0_or_alpha || a.pulses != b.pulses || a.seed != b.seed ||
      a.frames.size() != b.frames.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    const auto& fa = a.frames[i];
    const auto& fb = b.frames[i];
    if (fa.rows() != fb.rows() || fa.cols() != fb.cols()) return false;
    // Bitwise comparison so that -0.0 and 0.0 differ, as they do on disk.
    if (std::memcmp(fa.data(), fb.data(), sizeof(float) * static_cast<std::size_t>(fa.size())) != 0) {
      return false;
    }
  }
  return true;
}

void validate_record(const SimulationRecord& record, Index min_frames) {
  if (record.frame_count() < min_frames) {
    throw ConfigError("record has " + std::to_string(record.frame_count()) + " frames, need at least " +
                      std::to_string(min_frames));
  }
  const Index h = record.height();
  const Index w = record.width();
  if (h < kMinGridSize || w < kMinGridSize) {
    throw ConfigError("grid " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than 8x8");
  }
  for (Index t = 0; t < record.frame_count(); ++t) {
    const auto& f = record.frames[static_cast<std::size_t>(t)];
    if (f.rows() != h || f.cols() != w) {
      throw ConfigError("frame " + std::to_string(t) + " has a different shape than frame 0");
    }
    if (!all_finite(f)) throw NumericError("frame " + std::to_string(t) + " contains non-finite values");
  }
  if (!compatible(record.physics, record.bc)) {
    throw ConfigError("boundary '" + std::string(to_string(record.bc)) + "' is not valid for physics '" +
                      std::string(to_string(record.physics)) + "'");
  }
  if (!(record.dx > 0.0) || !(record.dt_frame > 0.0) || !(record.c0_or_alpha > 0.0)) {
    throw ConfigError("dx, dt_frame and c0_or_alpha must be positive");
  }
  for (const auto& p : record.pulses) validate_pulse(p, h, w);
}

Window sample_window(const SimulationRecord& record, Index t, Index k) {
  if (k < 1 || t < 0 || t + k > record.frame_count() - 1) {
    throw std::out_of_range("window t=" + std::to_string(t) + ", k=" + std::to_string(k) +
                            " is out of range for " + std::to_string(record.frame_count()) + " frames");
  }
  Window w;
  w.inputs.reserve(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) w.inputs.push_back(record.frames[static_cast<std::size_t>(t + i)]);
  w.target = record.frames[static_cast<std::size_t>(t + k)];
  return w;
}

}  // namespace fcnbc
