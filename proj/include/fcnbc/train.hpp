#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "fcnbc/adam.hpp"
#include "fcnbc/bc_strategy.hpp"
#include "fcnbc/msnet.hpp"
#include "fcnbc/record_io.hpp"

namespace fcnbc {

struct LossWeights {
  double lambda_l2 = 0.02;
  double lambda_gdl = 0.98;
};

/// Mean of squared differences over every element.
template <typename Scalar>
Scalar mse_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target);

/// Forward differences along x (H x (W-1)) and y ((H-1) x W); each axis
/// contributes the mean squared discrepancy over its differences, and the two
/// axis terms are summed.
template <typename Scalar>
Scalar gdl_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target);

template <typename Scalar>
Scalar combined_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, const LossWeights& w);

/// combined_loss and its gradient with respect to pred (grad is resized).
template <typename Scalar>
Scalar combined_loss_grad(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, const LossWeights& w,
                          Tensor<Scalar>& grad);

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

/// Joint mean and population standard deviation of the frames; std falls back
/// to 1 when the frames are constant.
NormStats window_stats(std::span<const Field2F> frames);

template <typename Scalar>
struct AssembledInput {
  Tensor<Scalar> x;  // (1, k [+1], H, W)
  NormStats stats;
};

/// Normalized frames stacked as channels, plus the unnormalized border mask
/// when the strategy uses spatial context.
template <typename Scalar>
AssembledInput<Scalar> assemble_input(std::span<const Field2F> window, const StrategyConfig& strategy);

template <typename Scalar>
Field2<Scalar> normalize(const Field2F& f, const NormStats& s) {
  return ((f.cast<double>() - s.mean) / s.std).cast<Scalar>();
}

template <typename Scalar>
Field2F denormalize(const Eigen::Ref<const Field2<Scalar>>& f, const NormStats& s) {
  return (f.template cast<double>() * s.std + s.mean).template cast<float>();
}

/// Counter-clockwise rotation by quarter_turns * 90 degrees.
template <typename Scalar>
Field2<Scalar> rotate90(const Field2<Scalar>& f, int quarter_turns);

/// Rotates every input frame and the target by the same multiple of 90 degrees.
Window augment_rotate(const Window& w, int quarter_turns);

struct TrainConfig {
  Index batch_size = 32;
  double lr0 = 1e-4;
  double lr_decay = 0.8;
  Index plateau_patience = 10;
  double plateau_min_improvement = 1e-3;
  double lr_floor = 1e-6;
  Index max_epochs = 100;
  bool augment_rotations = true;
  std::uint64_t seed = 0;
  LossWeights loss;
  StrategyConfig strategy;

  void validate() const;
};

struct EpochStats {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

/// Everything needed to continue training exactly where it stopped.
struct TrainerState {
  Index epochs_completed = 0;
  double learning_rate = 0.0;
  double best_val = 0.0;       // reference for the plateau schedule
  double best_checkpoint_val = 0.0;
  Index bad_epochs = 0;
  std::int64_t windows_trained = 0;
  std::vector<EpochStats> history;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // checkpoints and history.csv; empty disables I/O
  bool resume = false;
  std::function<void(const EpochStats&)> on_epoch;
  /// Upper bound on pixels pushed through the network at once (memory cap).
  Index max_batch_pixels = Index{1} << 18;
};

struct TrainResult {
  TrainerState state;
  AdamState<float> adam;
};

/// Validation loss (normalized space, no augmentation) of `model` on `records`.
double validation_loss(const MSNet<float>& model, std::span<const SimulationRecord> records, const TrainConfig& cfg);

/// Plateau schedule: returns the learning rate for the next epoch and updates
/// best/bad-epoch bookkeeping in `state`.
double plateau_update(TrainerState& state, double val_loss, const TrainConfig& cfg);

/// Single-step supervised training on in-memory records.
TrainResult train_records(MSNet<float>& model, std::span<const SimulationRecord> train,
                          std::span<const SimulationRecord> validation, const TrainConfig& cfg,
                          const TrainOptions& options = {});

/// Loads the manifest's train/validation splits and trains on them.
TrainResult train(MSNet<float>& model, const DatasetManifest& manifest, const TrainConfig& cfg,
                  const TrainOptions& options = {});

void write_history_csv(const std::vector<EpochStats>& history, const std::filesystem::path& path);

}  // namespace fcnbc
