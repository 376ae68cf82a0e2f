#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcnbc/bc_strategy.hpp"
#include "fcnbc/msnet.hpp"
#include "fcnbc/record_io.hpp"

namespace fcnbc {

enum class MetricKind { rel_rmse, rel_rmse_initial, t_rms, l2_norm };

inline constexpr MetricKind kAllMetrics[] = {MetricKind::rel_rmse, MetricKind::rel_rmse_initial, MetricKind::t_rms,
                                             MetricKind::l2_norm};

std::string_view to_string(MetricKind k);
MetricKind parse_metric(std::string_view s);

struct RolloutConfig {
  Index horizon = 200;
  StrategyConfig strategy;
  bool energy_correction = false;
  double divergence_factor = 1e6;
  /// Metric used for summary tables and trend comparisons.
  MetricKind primary_metric = MetricKind::rel_rmse;
  /// Keep predicted and true frames in the report (needed for snapshots).
  bool keep_frames = true;

  void validate() const;
};

/// Network call on a normalized (1, C, H, W) input returning (1, 1, H, W).
using Predictor = std::function<Tensor<float>(const Tensor<float>&)>;

struct RolloutResult {
  std::vector<Field2F> frames;              // predictions only, one per completed iteration
  std::optional<Index> divergence_index;    // 1-based iteration that blew up
  Index corrections_skipped = 0;            // zero-norm predictions left uncorrected

  bool diverged() const { return divergence_index.has_value(); }
};

/// Scales pred so its L2 norm equals target_energy; returns nullopt when pred
/// is identically zero and the target is positive.
std::optional<Field2F> energy_correction(const Field2F& pred, double target_energy);

/// One prediction in physical units from the last k frames; `prev` is the most
/// recent of them (used by the LODI rule).
Field2F predict_next(const Predictor& model, std::span<const Field2F> window, const StrategyConfig& strategy);

RolloutResult rollout(const Predictor& model, std::span<const Field2F> initial, const RolloutConfig& cfg);
RolloutResult rollout(const MSNet<float>& model, std::span<const Field2F> initial, const RolloutConfig& cfg);

double l2_norm(const Field2F& f);
double rel_rmse(const Field2F& pred, const Field2F& truth);
double rel_rmse_initial(const Field2F& pred, const Field2F& truth, double initial_norm);
double t_rms(const Field2F& f);

struct CaseResult {
  std::vector<PulseSpec> pulses;
  std::optional<Index> divergence_index;
  std::vector<std::vector<double>> series;  // [metric][iteration], truncated at divergence
  std::vector<Field2F> predictions;
  std::vector<Field2F> truth;  // the horizon frames following the initial window

  bool diverged() const { return divergence_index.has_value(); }
  const std::vector<double>& metric(MetricKind k) const { return series.at(static_cast<std::size_t>(k)); }
};

struct MetricAggregate {
  std::vector<double> mean, std, min, max;  // per iteration over non-diverged cases
};

struct EvalReport {
  RolloutConfig config;
  std::string label;  // e.g. "implicit+replicate"
  std::vector<CaseResult> cases;

  Index diverged_count() const;
  Index valid_count() const { return static_cast<Index>(cases.size()) - diverged_count(); }
  MetricAggregate aggregate(MetricKind k) const;
  /// min / max / avg of the final-iteration values over non-diverged cases (NaN if none).
  struct Final {
    double min, max, avg;
  };
  Final final_values(MetricKind k) const;
};

/// Ground-truth cases for evaluation: n_cases - 1 random pulse sets drawn from
/// an evaluation seed stream plus one centered pulse, each simulated to
/// k + horizon frames.
std::vector<SimulationRecord> evaluation_cases(const DatasetSpec& spec, Index n_cases, Index frames,
                                               std::uint64_t seed);

/// Evaluates metrics of a case from its ground truth (k initial frames + horizon).
CaseResult evaluate_case(const Predictor& model, const SimulationRecord& truth, Index k, const RolloutConfig& cfg);

EvalReport evaluate(const Predictor& model, std::span<const SimulationRecord> cases, Index k, const RolloutConfig& cfg);
EvalReport evaluate(const MSNet<float>& model, std::span<const SimulationRecord> cases, const RolloutConfig& cfg);

struct ExportOptions {
  std::vector<Index> snapshot_iterations;  // 1-based; empty picks first, middle, last
  bool write_frames = false;
};

/// metric_<kind>.csv, snapshots/*.pgm, summary.txt and summary.json.
void export_report(const EvalReport& report, const std::filesystem::path& out_dir, const ExportOptions& options = {});

/// Grayscale P5 image; values mapped affinely from [lo, hi] to [0, 255].
void write_pgm(const Field2F& f, double lo, double hi, const std::filesystem::path& path);

/// Table of min/max/avg rows, one per run directory holding a summary.json;
/// diverged runs print "inf".
std::string merge_reports(std::span<const std::filesystem::path> run_dirs);

}  // namespace fcnbc
