#include "fcnbc/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "fcnbc/checkpoint.hpp"
#include "fcnbc/json_config.hpp"

namespace fcnbc {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Losses

template <typename Scalar>
Scalar mse_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (pred.shape() != target.shape()) throw ConfigError("loss: prediction and target shapes differ");
  return (pred.values() - target.values()).square().mean();
}

namespace {

// Sum over planes of squared x- and y-difference discrepancies, and their counts.
template <typename Scalar>
void gdl_terms(const Tensor<Scalar>& e, double& sx, double& sy, Index& nx, Index& ny) {
  sx = sy = 0.0;
  const Index h = e.h();
  const Index w = e.w();
  for (Index b = 0; b < e.n(); ++b) {
    for (Index c = 0; c < e.c(); ++c) {
      const auto p = e.plane(b, c);
      if (w > 1) sx += (p.rightCols(w - 1) - p.leftCols(w - 1)).template cast<double>().square().sum();
      if (h > 1) sy += (p.bottomRows(h - 1) - p.topRows(h - 1)).template cast<double>().square().sum();
    }
  }
  nx = e.n() * e.c() * h * (w - 1);
  ny = e.n() * e.c() * (h - 1) * w;
}

template <typename Scalar>
Tensor<Scalar> difference(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (pred.shape() != target.shape()) throw ConfigError("loss: prediction and target shapes differ");
  Tensor<Scalar> e(pred.shape());
  e.values() = pred.values() - target.values();
  return e;
}

}  // namespace

template <typename Scalar>
Scalar gdl_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  const Tensor<Scalar> e = difference(pred, target);
  double sx, sy;
  Index nx, ny;
  gdl_terms(e, sx, sy, nx, ny);
  return static_cast<Scalar>((nx > 0 ? sx / nx : 0.0) + (ny > 0 ? sy / ny : 0.0));
}

template <typename Scalar>
Scalar combined_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, const LossWeights& w) {
  return static_cast<Scalar>(w.lambda_l2 * mse_loss(pred, target) + w.lambda_gdl * gdl_loss(pred, target));
}

template <typename Scalar>
Scalar combined_loss_grad(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, const LossWeights& w,
                          Tensor<Scalar>& grad) {
  const Tensor<Scalar> e = difference(pred, target);
  double sx, sy;
  Index nx, ny;
  gdl_terms(e, sx, sy, nx, ny);
  const double n = static_cast<double>(e.size());
  const double mse = e.values().template cast<double>().square().sum() / n;
  const double loss = w.lambda_l2 * mse + w.lambda_gdl * ((nx > 0 ? sx / nx : 0.0) + (ny > 0 ? sy / ny : 0.0));

  grad = Tensor<Scalar>(e.shape());
  grad.values() = e.values() * static_cast<Scalar>(2.0 * w.lambda_l2 / n);
  const Index h = e.h();
  const Index wd = e.w();
  const Scalar cx = nx > 0 ? static_cast<Scalar>(2.0 * w.lambda_gdl / nx) : Scalar(0);
  const Scalar cy = ny > 0 ? static_cast<Scalar>(2.0 * w.lambda_gdl / ny) : Scalar(0);
  for (Index b = 0; b < e.n(); ++b) {
    for (Index c = 0; c < e.c(); ++c) {
      const auto p = e.plane(b, c);
      auto g = grad.plane(b, c);
      if (wd > 1) {
        const Field2<Scalar> dx = (p.rightCols(wd - 1) - p.leftCols(wd - 1)) * cx;
        g.rightCols(wd - 1) += dx;
        g.leftCols(wd - 1) -= dx;
      }
      if (h > 1) {
        const Field2<Scalar> dy = (p.bottomRows(h - 1) - p.topRows(h - 1)) * cy;
        g.bottomRows(h - 1) += dy;
        g.topRows(h - 1) -= dy;
      }
    }
  }
  return static_cast<Scalar>(loss);
}

// ---------------------------------------------------------------------------
// Input assembly

NormStats window_stats(std::span<const Field2F> frames) {
  double sum = 0.0;
  double count = 0.0;
  for (const auto& f : frames) {
    sum += f.cast<double>().sum();
    count += static_cast<double>(f.size());
  }
  if (count == 0.0) return {};
  const double mean = sum / count;
  double ss = 0.0;
  for (const auto& f : frames) ss += (f.cast<double>() - mean).square().sum();
  const double std = std::sqrt(ss / count);
  return {mean, std > 0.0 && std::isfinite(std) ? std : 1.0};
}

template <typename Scalar>
AssembledInput<Scalar> assemble_input(std::span<const Field2F> window, const StrategyConfig& strategy) {
  if (window.empty()) throw ConfigError("assemble_input: empty window");
  AssembledInput<Scalar> out;
  out.stats = window_stats(window);
  const Index h = window[0].rows();
  const Index w = window[0].cols();
  const bool context = strategy.method == Method::context;
  const Index k = static_cast<Index>(window.size());
  out.x = Tensor<Scalar>(1, k + (context ? 1 : 0), h, w);
  for (Index c = 0; c < k; ++c) out.x.plane(0, c) = normalize<Scalar>(window[static_cast<std::size_t>(c)], out.stats);
  if (context) out.x.plane(0, k) = make_context_mask(h, w).cast<Scalar>();
  return out;
}

template <typename Scalar>
Field2<Scalar> rotate90(const Field2<Scalar>& f, int quarter_turns) {
  const int q = ((quarter_turns % 4) + 4) % 4;
  Field2<Scalar> out = f;
  for (int i = 0; i < q; ++i) {
    Field2<Scalar> t = out.transpose().colwise().reverse();
    out = std::move(t);
  }
  return out;
}

Window augment_rotate(const Window& w, int quarter_turns) {
  if (w.target.rows() != w.target.cols()) {
    throw ConfigError("rotation augmentation needs square fields, got " + std::to_string(w.target.rows()) + "x" +
                      std::to_string(w.target.cols()));
  }
  Window out;
  out.inputs.reserve(w.inputs.size());
  for (const auto& f : w.inputs) out.inputs.push_back(rotate90(f, quarter_turns));
  out.target = rotate90(w.target, quarter_turns);
  return out;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr0 > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw ConfigError("lr_decay must be in (0, 1)");
  if (plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
  if (plateau_min_improvement < 0.0) throw ConfigError("plateau_min_improvement must be >= 0");
  if (!(lr_floor > 0.0)) throw ConfigError("lr_floor must be positive");
  if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  if (loss.lambda_l2 < 0.0 || loss.lambda_gdl < 0.0) throw ConfigError("loss weights must be non-negative");
  strategy.validate();
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

struct Sample {
  std::size_t record;
  Index t;
  int turns;
};

std::vector<Sample> all_windows(std::span<const SimulationRecord> records, Index k) {
  std::vector<Sample> out;
  for (std::size_t r = 0; r < records.size(); ++r) {
    for (Index t = 0; t < window_count(records[r], k); ++t) out.push_back({r, t, 0});
  }
  return out;
}

void check_compatible(const MSNet<float>& model, const TrainConfig& cfg) {
  const bool wants_context = cfg.strategy.method == Method::context;
  if (model.config().context_channel != wants_context) {
    throw ConfigError(std::string("strategy ") + to_string(cfg.strategy) + (wants_context ? " needs" : " forbids") +
                      " a network built with the context channel");
  }
}

StrategyConfig resolve_lodi(StrategyConfig s, std::span<const SimulationRecord> records) {
  if (s.rule == ExplicitRule::lodi && !s.lodi && !records.empty()) {
    s.lodi = LodiParams{records[0].c0_or_alpha, records[0].dt_frame, records[0].dx};
  }
  return s;
}

struct Batch {
  Tensor<float> x;
  Tensor<float> target;
  std::vector<Field2F> prev;  // last input frame, normalized, for LODI
};

Batch make_batch(std::span<const SimulationRecord> records, std::span<const Sample> samples, Index k,
                 const StrategyConfig& strategy) {
  Batch b;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    Window w = sample_window(records[s.record], s.t, k);
    if (s.turns != 0) w = augment_rotate(w, s.turns);
    const auto in = assemble_input<float>(w.inputs, strategy);
    if (i == 0) {
      b.x = Tensor<float>(static_cast<Index>(samples.size()), in.x.c(), in.x.h(), in.x.w());
      b.target = Tensor<float>(static_cast<Index>(samples.size()), 1, in.x.h(), in.x.w());
    }
    b.x.set_item(static_cast<Index>(i), in.x);
    b.target.plane(static_cast<Index>(i), 0) = normalize<float>(w.target, in.stats);
    b.prev.push_back(in.x.plane(0, k - 1));
  }
  return b;
}

Index micro_batch(const SimulationRecord& r, Index max_pixels) {
  return std::max<Index>(1, max_pixels / std::max<Index>(1, r.height() * r.width()));
}

std::mt19937_64 epoch_rng(std::uint64_t seed, Index epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x65706f63u};
  return std::mt19937_64(seq);
}

double finite_or_max(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::max(); }

}  // namespace

double validation_loss(const MSNet<float>& model, std::span<const SimulationRecord> records, const TrainConfig& cfg) {
  const Index k = model.config().input_frames;
  const StrategyConfig strategy = resolve_lodi(cfg.strategy, records);
  const std::vector<Sample> samples = all_windows(records, k);
  if (samples.empty()) return 0.0;
  const Index chunk = micro_batch(records[0], TrainOptions{}.max_batch_pixels);
  double total = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(chunk));
    const auto part = std::span<const Sample>(samples).subspan(start, end - start);
    Batch b = make_batch(records, part, k, strategy);
    const Tensor<float> pred = apply_strategy<float>(strategy, model.forward(b.x), b.prev);
    total += static_cast<double>(combined_loss(pred, b.target, cfg.loss)) * static_cast<double>(part.size());
  }
  return total / static_cast<double>(samples.size());
}

double plateau_update(TrainerState& state, double val_loss, const TrainConfig& cfg) {
  if (val_loss < state.best_val * (1.0 - cfg.plateau_min_improvement)) {
    state.best_val = val_loss;
    state.bad_epochs = 0;
  } else if (++state.bad_epochs >= cfg.plateau_patience) {
    state.learning_rate = std::max(state.learning_rate * cfg.lr_decay, cfg.lr_floor);
    state.bad_epochs = 0;
  }
  return state.learning_rate;
}

TrainResult train_records(MSNet<float>& model, std::span<const SimulationRecord> train,
                          std::span<const SimulationRecord> validation, const TrainConfig& cfg,
                          const TrainOptions& options) {
  cfg.validate();
  check_compatible(model, cfg);
  if (train.empty()) throw ConfigError("training split is empty");
  const Index k = model.config().input_frames;
  for (const auto& r : train) {
    if (r.frame_count() < k + 1) throw ConfigError("training record shorter than one window");
  }
  const StrategyConfig strategy = resolve_lodi(cfg.strategy, train);
  const bool square = train[0].height() == train[0].width();

  TrainResult result;
  result.adam.learning_rate = cfg.lr0;
  result.state.learning_rate = cfg.lr0;
  result.state.best_val = std::numeric_limits<double>::max();
  result.state.best_checkpoint_val = std::numeric_limits<double>::max();

  const bool io = !options.out_dir.empty();
  if (io) fs::create_directories(options.out_dir);
  const fs::path last_path = options.out_dir / "last.ckpt";
  const fs::path best_path = options.out_dir / "best.ckpt";

  if (options.resume) {
    if (!io || !fs::exists(last_path)) throw ConfigError("nothing to resume: " + last_path.string() + " not found");
    Checkpoint ck = load_checkpoint(last_path);
    if (!(ck.model.config() == model.config())) {
      throw ConfigError("checkpoint network layout differs from the configured one");
    }
    model = std::move(ck.model);
    if (ck.adam) result.adam = std::move(*ck.adam);
    try {
      result.state = nlohmann::json::parse(ck.trainer_state).get<TrainerState>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(last_path.string() + ": bad trainer state: " + e.what());
    }
  }

  const std::vector<Sample> base = all_windows(train, k);
  const Index chunk = std::min(cfg.batch_size, micro_batch(train[0], options.max_batch_pixels));

  while (result.state.epochs_completed < cfg.max_epochs) {
    const Index epoch = result.state.epochs_completed;
    auto rng = epoch_rng(cfg.seed, epoch);
    std::vector<Sample> order = base;
    std::shuffle(order.begin(), order.end(), rng);
    if (cfg.augment_rotations && square) {
      std::uniform_int_distribution<int> turns(0, 3);
      for (auto& s : order) s.turns = turns(rng);
    }

    result.adam.learning_rate = result.state.learning_rate;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double batch = static_cast<double>(end - start);
      MSNetGradients<float> grads = model.zero_gradients();
      for (std::size_t m = start; m < end; m += static_cast<std::size_t>(chunk)) {
        const std::size_t mend = std::min(end, m + static_cast<std::size_t>(chunk));
        const auto part = std::span<const Sample>(order).subspan(m, mend - m);
        Batch b = make_batch(train, part, k, strategy);
        MSNetTrace<float> trace;
        const Tensor<float> raw = model.forward(b.x, trace);
        const Tensor<float> pred = apply_strategy<float>(strategy, raw, b.prev);
        Tensor<float> g;
        const double loss = combined_loss_grad(pred, b.target, cfg.loss, g);
        if (!std::isfinite(loss)) {
          throw NumericError("non-finite loss in epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(start / static_cast<std::size_t>(cfg.batch_size) + 1));
        }
        const double share = static_cast<double>(part.size()) / batch;
        loss_sum += loss * static_cast<double>(part.size());
        g.values() *= static_cast<float>(share);
        model.backward(trace, apply_strategy_adjoint(strategy, g), grads);
      }
      const auto blocks = model.param_blocks(grads);
      adam_step<float>(blocks, result.adam);
      result.state.windows_trained += static_cast<std::int64_t>(end - start);
    }
    if (!model.all_finite()) throw NumericError("training produced non-finite weights in epoch " + std::to_string(epoch + 1));

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.val_loss = validation.empty() ? stats.train_loss : validation_loss(model, validation, cfg);
    stats.lr = result.state.learning_rate;
    if (!std::isfinite(stats.val_loss)) throw NumericError("validation loss is not finite in epoch " + std::to_string(stats.epoch));

    const bool improved = stats.val_loss < result.state.best_checkpoint_val;
    if (improved) result.state.best_checkpoint_val = stats.val_loss;
    plateau_update(result.state, stats.val_loss, cfg);
    result.state.epochs_completed = stats.epoch;
    result.state.history.push_back(stats);

    if (io) {
      const std::string state_json = nlohmann::json(result.state).dump();
      save_checkpoint(last_path, model, &result.adam, state_json);
      if (improved) save_checkpoint(best_path, model, nullptr, state_json);
      write_history_csv(result.state.history, options.out_dir / "history.csv");
    }
    if (options.on_epoch) options.on_epoch(stats);
  }
  result.state.best_val = finite_or_max(result.state.best_val);
  return result;
}

TrainResult train(MSNet<float>& model, const DatasetManifest& manifest, const TrainConfig& cfg,
                  const TrainOptions& options) {
  const auto tr = manifest.load_split(Split::train);
  const auto va = manifest.load_split(Split::validation);
  TrainConfig c = cfg;
  if (c.strategy.rule == ExplicitRule::lodi && !c.strategy.lodi) {
    c.strategy.lodi = LodiParams{manifest.spec.c0_or_alpha, manifest.spec.dt_frame(), manifest.spec.dx};
  }
  return train_records(model, tr, va, c, options);
}

void write_history_csv(const std::vector<EpochStats>& history, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.precision(9);
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : history) out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr << '\n';
}

#define FCNBC_INSTANTIATE_TRAIN(S)                                                                          \
  template S mse_loss(const Tensor<S>&, const Tensor<S>&);                                                 \
  template S gdl_loss(const Tensor<S>&, const Tensor<S>&);                                                 \
  template S combined_loss(const Tensor<S>&, const Tensor<S>&, const LossWeights&);                        \
  template S combined_loss_grad(const Tensor<S>&, const Tensor<S>&, const LossWeights&, Tensor<S>&);        \
  template AssembledInput<S> assemble_input(std::span<const Field2F>, const StrategyConfig&);               \
  template Field2<S> rotate90(const Field2<S>&, int);

FCNBC_INSTANTIATE_TRAIN(float)
FCNBC_INSTANTIATE_TRAIN(double)

#undef FCNBC_INSTANTIATE_TRAIN

}  // namespace fcnbc
