#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fcnbc/msnet.hpp"
#include "fcnbc/record_io.hpp"
#include "fcnbc/rollout.hpp"
#include "fcnbc/train.hpp"

namespace fcnbc {

/// One (dataset, strategy, padding) run.
struct ExperimentConfig {
  std::string preset;  // name the config started from, if any
  DatasetSpec dataset;
  std::filesystem::path dataset_dir = "data";
  MSNetConfig model;
  TrainConfig training;
  RolloutConfig rollout;
  Index n_cases = 25;
  std::uint64_t eval_seed = 7;
  std::filesystem::path out_dir = "run";

  /// Strategy shared by the network, training and rollout.
  const StrategyConfig& strategy() const { return training.strategy; }
  void set_strategy(const StrategyConfig& s);

  /// Cross-field checks: physics/bc pair, explicit rule vs bc, network
  /// input layout vs strategy, grid divisible by 4.
  void validate() const;
};

/// "D1".."D4" at full scale and "D1-small".."D4-small" at desk scale.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// The explicit rule matching a boundary kind.
ExplicitRule rule_for(BoundaryKind bc);

/// Applies a JSON document on top of its "preset" (or the defaults).
/// Unknown top-level keys are rejected.
ExperimentConfig experiment_from_json(const nlohmann::json& doc);
nlohmann::json experiment_to_json(const ExperimentConfig& c);

ExperimentConfig load_experiment(const std::filesystem::path& path);
void save_experiment(const ExperimentConfig& c, const std::filesystem::path& path);

}  // namespace fcnbc
