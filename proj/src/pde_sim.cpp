#include "fcnbc/pde_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace fcnbc {

namespace fs = std::filesystem;

void WaveParams::validate() const {
  if (n < kMinGridSize) throw ConfigError("wave grid must be at least 8 cells per side");
  if (!(dx > 0.0) || !(dt > 0.0) || !(c0 > 0.0) || frame_stride < 1) {
    throw ConfigError("wave dx, dt, c0 and frame_stride must be positive");
  }
  if (bc == BoundaryKind::adiabatic) throw ConfigError("adiabatic walls are a heat boundary condition");
  if (courant() > 1.0 / std::sqrt(2.0) + 1e-12) {
    throw ConfigError("wave CFL number " + std::to_string(courant()) + " exceeds 1/sqrt(2)");
  }
}

void HeatParams::validate() const {
  if (n < kMinGridSize) throw ConfigError("heat grid must be at least 8 cells per side");
  if (!(dx > 0.0) || !(dt > 0.0) || !(alpha > 0.0) || frame_stride < 1) {
    throw ConfigError("heat dx, dt, alpha and frame_stride must be positive");
  }
  if (diffusion_number() > 0.25 + 1e-12) {
    throw ConfigError("heat diffusion number " + std::to_string(diffusion_number()) + " exceeds 1/4");
  }
}

void ICConfig::validate() const {
  if (min_pulses < 1 || max_pulses < min_pulses) throw ConfigError("pulse count range must be within [1, max]");
  if (amplitude == 0.0 || !std::isfinite(amplitude)) throw ConfigError("pulse amplitude must be finite and nonzero");
  if (!(half_width > 0.0)) throw ConfigError("pulse half_width must be positive");
}

Field2D init_field(std::span<const PulseSpec> pulses, Index n, double dx) {
  if (pulses.empty()) throw ConfigError("init_field needs at least one pulse");
  if (!(dx > 0.0)) throw ConfigError("dx must be positive");
  Field2D f = Field2D::Zero(n, n);
  for (const auto& p : pulses) {
    validate_pulse(p, n, n);
    const double b = p.half_width * dx;
    const double coef = std::log(2.0) / (b * b);
    for (Index i = 0; i < n; ++i) {
      const double ddy = (static_cast<double>(i) - p.y0) * dx;
      for (Index j = 0; j < n; ++j) {
        const double ddx = (static_cast<double>(j) - p.x0) * dx;
        f(i, j) += p.amplitude * std::exp(-coef * (ddx * ddx + ddy * ddy));
      }
    }
  }
  return f;
}

namespace {

std::mt19937_64 record_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

void require_same_shape(const Field2D& a, const Field2D& b, Index n) {
  if (a.rows() != n || a.cols() != n || b.rows() != n || b.cols() != n) {
    throw ConfigError("solver fields must be " + std::to_string(n) + "x" + std::to_string(n));
  }
}

}  // namespace

std::vector<PulseSpec> sample_pulses(const ICConfig& ic, Index n, Index index) {
  ic.validate();
  const double lo = ic.half_width;
  const double hi = static_cast<double>(n - 1) - ic.half_width;
  if (hi < lo) throw ConfigError("pulse half_width too large for the grid");
  auto rng = record_rng(ic.rng_seed, static_cast<std::uint64_t>(index), 0x70756c73);
  std::uniform_int_distribution<Index> count(ic.min_pulses, ic.max_pulses);
  std::uniform_real_distribution<double> pos(lo, hi);
  const Index p = count(rng);
  std::vector<PulseSpec> pulses;
  pulses.reserve(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) {
    PulseSpec s;
    s.x0 = pos(rng);
    s.y0 = pos(rng);
    s.amplitude = ic.amplitude;
    s.half_width = ic.half_width;
    pulses.push_back(s);
  }
  return pulses;
}

PulseSpec centered_pulse(const ICConfig& ic, Index n) {
  const double c = 0.5 * static_cast<double>(n - 1);
  return PulseSpec{c, c, ic.amplitude, ic.half_width};
}

Field2D discrete_laplacian(const Field2D& u, bool periodic) {
  const Index h = u.rows();
  const Index w = u.cols();
  Field2D lap(h, w);
  for (Index i = 0; i < h; ++i) {
    // Zero-flux walls mirror the cell itself (ghost = boundary cell); periodic wraps.
    const Index up = i > 0 ? i - 1 : (periodic ? h - 1 : 0);
    const Index dn = i < h - 1 ? i + 1 : (periodic ? 0 : h - 1);
    for (Index j = 0; j < w; ++j) {
      const Index lf = j > 0 ? j - 1 : (periodic ? w - 1 : 0);
      const Index rt = j < w - 1 ? j + 1 : (periodic ? 0 : w - 1);
      const double c = u(i, j);
      lap(i, j) = (u(up, j) - c) + (u(dn, j) - c) + (u(i, lf) - c) + (u(i, rt) - c);
    }
  }
  return lap;
}

Field2D wave_step(const Field2D& prev, const Field2D& curr, const WaveParams& p) {
  require_same_shape(prev, curr, p.n);
  const double c2 = p.courant() * p.courant();
  if (p.bc != BoundaryKind::absorbing) {
    return 2.0 * curr - prev + c2 * discrete_laplacian(curr, p.bc == BoundaryKind::periodic);
  }

  const Index n = p.n;
  Field2D next(n, n);
  for (Index i = 1; i < n - 1; ++i) {
    for (Index j = 1; j < n - 1; ++j) {
      const double lap = curr(i - 1, j) + curr(i + 1, j) + curr(i, j - 1) + curr(i, j + 1) - 4.0 * curr(i, j);
      next(i, j) = 2.0 * curr(i, j) - prev(i, j) + c2 * lap;
    }
  }
  // First-order Mur: one-way wave equation discretized on each wall.
  const double k = (p.courant() - 1.0) / (p.courant() + 1.0);
  const auto mur = [&](Index bi, Index bj, Index ni, Index nj) {
    return curr(ni, nj) + k * (next(ni, nj) - curr(bi, bj));
  };
  for (Index i = 1; i < n - 1; ++i) {
    next(i, 0) = mur(i, 0, i, 1);
    next(i, n - 1) = mur(i, n - 1, i, n - 2);
  }
  for (Index j = 1; j < n - 1; ++j) {
    next(0, j) = mur(0, j, 1, j);
    next(n - 1, j) = mur(n - 1, j, n - 2, j);
  }
  const Index e = n - 1;
  next(0, 0) = 0.5 * (mur(0, 0, 0, 1) + mur(0, 0, 1, 0));
  next(0, e) = 0.5 * (mur(0, e, 0, e - 1) + mur(0, e, 1, e));
  next(e, 0) = 0.5 * (mur(e, 0, e, 1) + mur(e, 0, e - 1, 0));
  next(e, e) = 0.5 * (mur(e, e, e, e - 1) + mur(e, e, e - 1, e));
  return next;
}

Field2D wave_first_step(const Field2D& initial, const WaveParams& p) {
  require_same_shape(initial, initial, p.n);
  const double c2 = p.courant() * p.courant();
  if (p.bc != BoundaryKind::absorbing) {
    return initial + 0.5 * c2 * discrete_laplacian(initial, p.bc == BoundaryKind::periodic);
  }
  // A field at rest: prev = rho^0 + (C^2/2) lap(rho^0) gives the same Taylor start in the interior.
  const Field2D prev = initial + 0.5 * c2 * discrete_laplacian(initial, false);
  return wave_step(prev, initial, p);
}

Field2D heat_step(const Field2D& curr, const HeatParams& p) {
  require_same_shape(curr, curr, p.n);
  return curr + p.diffusion_number() * discrete_laplacian(curr, false);
}

std::vector<Field2D> simulate_wave(std::span<const PulseSpec> pulses, const WaveParams& p, Index frames) {
  p.validate();
  std::vector<Field2D> out;
  out.reserve(static_cast<std::size_t>(frames));
  Field2D prev = init_field(pulses, p.n, p.dx);
  out.push_back(prev);
  if (frames <= 1) return out;
  Field2D curr = wave_first_step(prev, p);
  Index steps = 1;
  while (static_cast<Index>(out.size()) < frames) {
    if (steps % p.frame_stride == 0) {
      out.push_back(curr);
      if (static_cast<Index>(out.size()) == frames) break;
    }
    Field2D next = wave_step(prev, curr, p);
    prev = std::move(curr);
    curr = std::move(next);
    ++steps;
  }
  return out;
}

std::vector<Field2D> simulate_heat(std::span<const PulseSpec> pulses, const HeatParams& p, Index frames) {
  p.validate();
  std::vector<Field2D> out;
  out.reserve(static_cast<std::size_t>(frames));
  Field2D curr = init_field(pulses, p.n, p.dx);
  out.push_back(curr);
  while (static_cast<Index>(out.size()) < frames) {
    for (Index s = 0; s < p.frame_stride; ++s) curr = heat_step(curr, p);
    out.push_back(curr);
  }
  return out;
}

WaveParams wave_params(const DatasetSpec& s) {
  return WaveParams{s.n, s.dx, s.dt, s.c0_or_alpha, s.bc, s.frame_stride};
}

HeatParams heat_params(const DatasetSpec& s) { return HeatParams{s.n, s.dx, s.dt, s.c0_or_alpha, s.frame_stride}; }

ICConfig ic_config(const DatasetSpec& s) {
  return ICConfig{s.min_pulses, s.max_pulses, s.amplitude, s.half_width, s.seed};
}

void validate(const DatasetSpec& s) {
  if (!compatible(s.physics, s.bc)) {
    throw ConfigError("boundary '" + std::string(to_string(s.bc)) + "' is not valid for physics '" +
                      std::string(to_string(s.physics)) + "'");
  }
  if (s.n < kMinGridSize || s.n % 4 != 0) throw ConfigError("grid size must be >= 8 and divisible by 4");
  if (s.frames < 5) throw ConfigError("datasets need at least 5 frames per simulation");
  if (s.count < 1 || s.train_count < 0 || s.train_count > s.count) {
    throw ConfigError("count must be >= 1 and 0 <= train_count <= count");
  }
  if (s.physics == Physics::wave) {
    wave_params(s).validate();
  } else {
    heat_params(s).validate();
  }
  ic_config(s).validate();
}

std::vector<Field2D> simulate(const DatasetSpec& spec, std::span<const PulseSpec> pulses, Index frames) {
  return spec.physics == Physics::wave ? simulate_wave(pulses, wave_params(spec), frames)
                                       : simulate_heat(pulses, heat_params(spec), frames);
}

SimulationRecord make_record(const DatasetSpec& spec, std::vector<PulseSpec> pulses, std::uint64_t seed,
                             Index frames) {
  SimulationRecord r;
  for (const auto& f : simulate(spec, pulses, frames)) r.frames.push_back(f.cast<float>());
  r.dx = spec.dx;
  r.dt_frame = spec.dt_frame();
  r.physics = spec.physics;
  r.bc = spec.bc;
  r.c0_or_alpha = spec.c0_or_alpha;
  r.pulses = std::move(pulses);
  r.seed = seed;
  return r;
}

DatasetManifest generate_dataset(const DatasetSpec& spec, const fs::path& out_dir) {
  validate(spec);
  fs::create_directories(out_dir);
  const ICConfig ic = ic_config(spec);

  std::vector<Index> order(static_cast<std::size_t>(spec.count));
  std::iota(order.begin(), order.end(), Index{0});
  auto split_rng = record_rng(spec.seed, 0, 0x73706c74);
  std::shuffle(order.begin(), order.end(), split_rng);
  std::vector<Split> split(order.size(), Split::validation);
  for (Index i = 0; i < spec.train_count; ++i) split[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = Split::train;

  DatasetManifest m;
  m.spec = spec;
  m.directory = out_dir;
  for (Index i = 0; i < spec.count; ++i) {
    auto pulses = sample_pulses(ic, spec.n, i);
    const std::uint64_t seed = spec.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1));
    SimulationRecord r = make_record(spec, pulses, seed, spec.frames);
    char name[32];
    std::snprintf(name, sizeof(name), "sim_%05lld.rec", static_cast<long long>(i));
    write_record(r, out_dir / name);
    ManifestEntry e;
    e.path = name;
    e.split = split[static_cast<std::size_t>(i)];
    e.frames = r.frame_count();
    e.height = r.height();
    e.width = r.width();
    e.seed = seed;
    e.pulses = r.pulses;
    m.records.push_back(std::move(e));
  }
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace fcnbc
