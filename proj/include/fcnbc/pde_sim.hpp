#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fcnbc/field.hpp"
#include "fcnbc/record_io.hpp"

namespace fcnbc {

struct WaveParams {
  Index n = 64;
  double dx = 0.5;
  double dt = 0.25;
  double c0 = 1.0;
  BoundaryKind bc = BoundaryKind::reflecting;
  Index frame_stride = 1;

  double courant() const { return c0 * dt / dx; }
  void validate() const;
};

struct HeatParams {
  Index n = 64;
  double dx = 0.005;
  double dt = 1.0 / 32.0;
  double alpha = 8.0 * 0.005 * 0.005;
  Index frame_stride = 128;

  double diffusion_number() const { return alpha * dt / (dx * dx); }
  void validate() const;
};

struct ICConfig {
  Index min_pulses = 1;
  Index max_pulses = 5;
  double amplitude = 0.001;
  double half_width = 12.0;  // grid units
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Superposition of Gaussian pulses sampled at cell centers x = j dx, y = i dx.
Field2D init_field(std::span<const PulseSpec> pulses, Index n, double dx);

/// Random pulse set for one simulation; depends only on (ic.rng_seed, index).
std::vector<PulseSpec> sample_pulses(const ICConfig& ic, Index n, Index index);

/// The single pulse at the domain center used as the symmetric evaluation case.
PulseSpec centered_pulse(const ICConfig& ic, Index n);

/// One leapfrog step of d2rho/dt2 = c0^2 lap(rho) with the walls given by p.bc.
Field2D wave_step(const Field2D& prev, const Field2D& curr, const WaveParams& p);

/// Start-up step for a field at rest: rho^1 = rho^0 + (C^2 / 2) lap(rho^0).
Field2D wave_first_step(const Field2D& initial, const WaveParams& p);

/// One flux-form FTCS step of dT/dt = alpha lap(T) with zero-flux walls.
Field2D heat_step(const Field2D& curr, const HeatParams& p);

/// Five-point Laplacian (times dx^2) with zero-flux walls or wrap-around neighbors.
Field2D discrete_laplacian(const Field2D& u, bool periodic);

/// Runs the solver from `pulses` and keeps every frame_stride-th state, `frames` in total.
std::vector<Field2D> simulate_wave(std::span<const PulseSpec> pulses, const WaveParams& p, Index frames);
std::vector<Field2D> simulate_heat(std::span<const PulseSpec> pulses, const HeatParams& p, Index frames);

WaveParams wave_params(const DatasetSpec& spec);
HeatParams heat_params(const DatasetSpec& spec);
ICConfig ic_config(const DatasetSpec& spec);

/// Simulates `frames` frames for the given pulses under spec's physics (64-bit).
std::vector<Field2D> simulate(const DatasetSpec& spec, std::span<const PulseSpec> pulses, Index frames);

/// Builds a 32-bit record for pulse set `pulses` with the metadata of `spec`.
SimulationRecord make_record(const DatasetSpec& spec, std::vector<PulseSpec> pulses, std::uint64_t seed,
                             Index frames);

void validate(const DatasetSpec& spec);

/// Writes spec.count records plus manifest.json into out_dir. Output is a pure
/// function of spec (per-record seeding), whatever the thread count.
DatasetManifest generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

}  // namespace fcnbc
