#include "fcnbc/rollout.hpp"

#include <cmath>
#include <limits>

#include "fcnbc/pde_sim.hpp"
#include "fcnbc/train.hpp"

namespace fcnbc {

std::string_view to_string(MetricKind k) {
  switch (k) {
    case MetricKind::rel_rmse: return "rel_rmse";
    case MetricKind::rel_rmse_initial: return "rel_rmse_initial";
    case MetricKind::t_rms: return "t_rms";
    case MetricKind::l2_norm: return "l2_norm";
  }
  return "?";
}

MetricKind parse_metric(std::string_view s) {
  for (MetricKind k : kAllMetrics) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown metric '" + std::string(s) + "'");
}

void RolloutConfig::validate() const {
  if (horizon < 1) throw ConfigError("rollout horizon must be >= 1");
  if (!(divergence_factor > 0.0)) throw ConfigError("divergence_factor must be positive");
  strategy.validate();
}

double l2_norm(const Field2F& f) { return std::sqrt(f.cast<double>().square().sum()); }

double rel_rmse(const Field2F& pred, const Field2F& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) throw ConfigError("rel_rmse: shape mismatch");
  const double denom = l2_norm(truth);
  if (!(denom > 0.0)) throw NumericError("rel_rmse: ground truth is identically zero; use rel_rmse_initial");
  return std::sqrt((pred.cast<double>() - truth.cast<double>()).square().sum()) / denom;
}

double rel_rmse_initial(const Field2F& pred, const Field2F& truth, double initial_norm) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) throw ConfigError("rel_rmse_initial: shape mismatch");
  if (!(initial_norm > 0.0)) throw ConfigError("rel_rmse_initial: initial norm must be positive");
  return std::sqrt((pred.cast<double>() - truth.cast<double>()).square().sum()) / initial_norm;
}

double t_rms(const Field2F& f) {
  if (f.size() == 0) return 0.0;
  return std::sqrt(f.cast<double>().square().mean());
}

std::optional<Field2F> energy_correction(const Field2F& pred, double target_energy) {
  if (!(target_energy >= 0.0)) throw ConfigError("energy_correction: target energy must be >= 0");
  const double norm = l2_norm(pred);
  if (norm == 0.0) {
    if (target_energy > 0.0) return std::nullopt;
    return pred;
  }
  return (pred.cast<double>() * (target_energy / norm)).cast<float>();
}

Field2F predict_next(const Predictor& model, std::span<const Field2F> window, const StrategyConfig& strategy) {
  const auto in = assemble_input<float>(window, strategy);
  const Tensor<float> raw = model(in.x);
  if (raw.shape() != Shape4{1, 1, in.x.h(), in.x.w()}) {
    throw ConfigError("model returned shape " + to_string(raw.shape()));
  }
  Tensor<float> phys(raw.shape());
  phys.plane(0, 0) = denormalize<float>(raw.plane(0, 0), in.stats);
  if (strategy.method != Method::explicit_encoding) return phys.plane(0, 0);
  const Field2F prev = window.back();
  const Tensor<float> enforced = apply_strategy<float>(strategy, phys, std::span<const Field2F>(&prev, 1));
  return enforced.plane(0, 0);
}

RolloutResult rollout(const Predictor& model, std::span<const Field2F> initial, const RolloutConfig& cfg) {
  cfg.validate();
  if (initial.empty()) throw ConfigError("rollout needs at least one initial frame");
  if (initial[0].rows() % 4 != 0 || initial[0].cols() % 4 != 0) {
    throw ConfigError("rollout: grid size must be divisible by 4");
  }
  double init_max = 0.0;
  for (const auto& f : initial) init_max = std::max(init_max, static_cast<double>(f.abs().maxCoeff()));
  const double limit = cfg.divergence_factor * (init_max > 0.0 ? init_max : 1.0);
  const double target_energy = l2_norm(initial.back());

  RolloutResult out;
  std::vector<Field2F> window(initial.begin(), initial.end());
  out.frames.reserve(static_cast<std::size_t>(cfg.horizon));
  for (Index it = 1; it <= cfg.horizon; ++it) {
    Field2F next = predict_next(model, window, cfg.strategy);
    if (cfg.energy_correction) {
      if (auto c = energy_correction(next, target_energy)) {
        next = std::move(*c);
      } else {
        ++out.corrections_skipped;
      }
    }
    if (!next.allFinite() || static_cast<double>(next.abs().maxCoeff()) > limit) {
      out.divergence_index = it;
      break;
    }
    window.erase(window.begin());
    window.push_back(next);
    out.frames.push_back(std::move(next));
  }
  return out;
}

RolloutResult rollout(const MSNet<float>& model, std::span<const Field2F> initial, const RolloutConfig& cfg) {
  if (static_cast<Index>(initial.size()) != model.config().input_frames) {
    throw ConfigError("rollout: network expects " + std::to_string(model.config().input_frames) + " initial frames");
  }
  return rollout([&model](const Tensor<float>& x) { return model.forward(x); }, initial, cfg);
}

// ---------------------------------------------------------------------------
// Evaluation

Index EvalReport::diverged_count() const {
  Index n = 0;
  for (const auto& c : cases) n += c.diverged() ? 1 : 0;
  return n;
}

MetricAggregate EvalReport::aggregate(MetricKind k) const {
  const auto h = static_cast<std::size_t>(config.horizon);
  MetricAggregate a;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  a.mean.assign(h, nan);
  a.std.assign(h, nan);
  a.min.assign(h, nan);
  a.max.assign(h, nan);
  for (std::size_t t = 0; t < h; ++t) {
    double sum = 0.0, sq = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    Index n = 0;
    for (const auto& c : cases) {
      if (c.diverged()) continue;
      const auto& s = c.metric(k);
      if (t >= s.size()) continue;
      sum += s[t];
      sq += s[t] * s[t];
      lo = std::min(lo, s[t]);
      hi = std::max(hi, s[t]);
      ++n;
    }
    if (n == 0) continue;
    const double mean = sum / static_cast<double>(n);
    a.mean[t] = mean;
    a.std[t] = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
    a.min[t] = lo;
    a.max[t] = hi;
  }
  return a;
}

EvalReport::Final EvalReport::final_values(MetricKind k) const {
  const auto a = aggregate(k);
  if (a.mean.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
  }
  return {a.min.back(), a.max.back(), a.mean.back()};
}

std::vector<SimulationRecord> evaluation_cases(const DatasetSpec& spec, Index n_cases, Index frames,
                                               std::uint64_t seed) {
  if (n_cases < 1) throw ConfigError("need at least one evaluation case");
  ICConfig ic = ic_config(spec);
  ic.rng_seed = seed ^ 0x6576616c75617465ULL;
  std::vector<SimulationRecord> out;
  for (Index i = 0; i < n_cases; ++i) {
    std::vector<PulseSpec> pulses =
        i + 1 == n_cases ? std::vector<PulseSpec>{centered_pulse(ic, spec.n)} : sample_pulses(ic, spec.n, i);
    out.push_back(make_record(spec, std::move(pulses), ic.rng_seed + static_cast<std::uint64_t>(i), frames));
  }
  return out;
}

CaseResult evaluate_case(const Predictor& model, const SimulationRecord& truth, Index k, const RolloutConfig& cfg) {
  if (truth.frame_count() < k + cfg.horizon) {
    throw ConfigError("ground truth has " + std::to_string(truth.frame_count()) + " frames, need " +
                      std::to_string(k + cfg.horizon));
  }
  const std::span<const Field2F> initial(truth.frames.data(), static_cast<std::size_t>(k));
  RolloutResult r = rollout(model, initial, cfg);

  CaseResult c;
  c.pulses = truth.pulses;
  c.divergence_index = r.divergence_index;
  c.series.assign(std::size(kAllMetrics), {});
  const double initial_norm = l2_norm(truth.frames[0]);
  for (std::size_t t = 0; t < r.frames.size(); ++t) {
    const Field2F& p = r.frames[t];
    const Field2F& g = truth.frames[static_cast<std::size_t>(k) + t];
    const double g_norm = l2_norm(g);
    c.series[0].push_back(g_norm > 0.0 ? rel_rmse(p, g) : std::numeric_limits<double>::quiet_NaN());
    c.series[1].push_back(initial_norm > 0.0 ? rel_rmse_initial(p, g, initial_norm)
                                             : std::numeric_limits<double>::quiet_NaN());
    c.series[2].push_back(t_rms(p));
    c.series[3].push_back(l2_norm(p));
  }
  if (cfg.keep_frames) {
    c.predictions = std::move(r.frames);
    c.truth.assign(truth.frames.begin() + k, truth.frames.begin() + k + cfg.horizon);
  }
  return c;
}

EvalReport evaluate(const Predictor& model, std::span<const SimulationRecord> cases, Index k, const RolloutConfig& cfg) {
  if (cases.empty()) throw ConfigError("evaluate: no ground-truth cases");
  EvalReport rep;
  rep.config = cfg;
  rep.label = to_string(cfg.strategy);
  for (const auto& truth : cases) rep.cases.push_back(evaluate_case(model, truth, k, cfg));
  return rep;
}

EvalReport evaluate(const MSNet<float>& model, std::span<const SimulationRecord> cases, const RolloutConfig& cfg) {
  return evaluate([&model](const Tensor<float>& x) { return model.forward(x); }, cases, model.config().input_frames,
                  cfg);
}

}  // namespace fcnbc
