#include "fcnbc/json_config.hpp"

namespace fcnbc {

using nlohmann::json;

void to_json(json& j, const BankSpec& b) {
  j = json{{"scale_divisor", b.scale_divisor},
           {"layer_channels", b.layer_channels},
           {"kernel_sizes", b.kernel_sizes},
           {"output_channels", b.output_channels}};
}

void from_json(const json& j, BankSpec& b) {
  b.scale_divisor = j.at("scale_divisor").get<Index>();
  b.layer_channels = j.at("layer_channels").get<std::vector<Index>>();
  b.kernel_sizes = j.at("kernel_sizes").get<std::vector<Index>>();
  b.output_channels = j.value("output_channels", Index{1});
}

void to_json(json& j, const MSNetConfig& c) {
  j = json{{"input_frames", c.input_frames},
           {"context_channel", c.context_channel},
           {"padding", to_string(c.padding_mode)},
           {"banks", c.banks},
           {"seed", c.seed}};
}

void from_json(const json& j, MSNetConfig& c) {
  c.input_frames = j.value("input_frames", Index{4});
  c.context_channel = j.value("context_channel", false);
  c.padding_mode = parse_pad_kind(j.value("padding", std::string("replicate")));
  c.banks = j.at("banks").get<std::vector<BankSpec>>();
  c.seed = j.value("seed", std::uint64_t{0});
}

void to_json(json& j, const StrategyConfig& s) {
  j = json{{"name", to_string(s)}};
  if (s.lodi) j["lodi"] = json{{"c0", s.lodi->c0}, {"dt", s.lodi->dt}, {"dx", s.lodi->dx}};
}

void from_json(const json& j, StrategyConfig& s) {
  if (j.is_string()) {
    s = parse_strategy(j.get<std::string>());
    return;
  }
  s = parse_strategy(j.at("name").get<std::string>());
  if (j.contains("lodi") && s.rule == ExplicitRule::lodi) {
    const auto& l = j.at("lodi");
    s.lodi = LodiParams{l.at("c0").get<double>(), l.at("dt").get<double>(), l.at("dx").get<double>()};
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"batch_size", c.batch_size},
           {"lr0", c.lr0},
           {"lr_decay", c.lr_decay},
           {"plateau_patience", c.plateau_patience},
           {"plateau_min_improvement", c.plateau_min_improvement},
           {"lr_floor", c.lr_floor},
           {"max_epochs", c.max_epochs},
           {"augment_rotations", c.augment_rotations},
           {"seed", c.seed},
           {"lambda_l2", c.loss.lambda_l2},
           {"lambda_gdl", c.loss.lambda_gdl},
           {"strategy", c.strategy}};
}

void from_json(const json& j, TrainConfig& c) {
  const TrainConfig d;
  c.batch_size = j.value("batch_size", d.batch_size);
  c.lr0 = j.value("lr0", d.lr0);
  c.lr_decay = j.value("lr_decay", d.lr_decay);
  c.plateau_patience = j.value("plateau_patience", d.plateau_patience);
  c.plateau_min_improvement = j.value("plateau_min_improvement", d.plateau_min_improvement);
  c.lr_floor = j.value("lr_floor", d.lr_floor);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.augment_rotations = j.value("augment_rotations", d.augment_rotations);
  c.seed = j.value("seed", d.seed);
  c.loss.lambda_l2 = j.value("lambda_l2", d.loss.lambda_l2);
  c.loss.lambda_gdl = j.value("lambda_gdl", d.loss.lambda_gdl);
  c.strategy = j.contains("strategy") ? j.at("strategy").get<StrategyConfig>() : d.strategy;
}

void to_json(json& j, const DatasetSpec& s) {
  j = json{{"physics", to_string(s.physics)},
           {"bc", to_string(s.bc)},
           {"count", s.count},
           {"train_count", s.train_count},
           {"n", s.n},
           {"frames", s.frames},
           {"dx", s.dx},
           {"dt", s.dt},
           {"c0_or_alpha", s.c0_or_alpha},
           {"frame_stride", s.frame_stride},
           {"min_pulses", s.min_pulses},
           {"max_pulses", s.max_pulses},
           {"amplitude", s.amplitude},
           {"half_width", s.half_width},
           {"seed", s.seed}};
}

void from_json(const json& j, DatasetSpec& s) {
  const DatasetSpec d = s;
  s.physics = parse_physics(j.value("physics", std::string(to_string(d.physics))));
  s.bc = parse_boundary(j.value("bc", std::string(to_string(d.bc))));
  s.count = j.value("count", d.count);
  s.train_count = j.value("train_count", d.train_count);
  s.n = j.value("n", d.n);
  s.frames = j.value("frames", d.frames);
  s.dx = j.value("dx", d.dx);
  s.dt = j.value("dt", d.dt);
  s.c0_or_alpha = j.value("c0_or_alpha", d.c0_or_alpha);
  s.frame_stride = j.value("frame_stride", d.frame_stride);
  s.min_pulses = j.value("min_pulses", d.min_pulses);
  s.max_pulses = j.value("max_pulses", d.max_pulses);
  s.amplitude = j.value("amplitude", d.amplitude);
  s.half_width = j.value("half_width", d.half_width);
  s.seed = j.value("seed", d.seed);
}

void to_json(json& j, const TrainerState& s) {
  json history = json::array();
  for (const auto& e : s.history) {
    history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"lr", e.lr}});
  }
  j = json{{"epochs_completed", s.epochs_completed},
           {"learning_rate", s.learning_rate},
           {"best_val", s.best_val},
           {"best_checkpoint_val", s.best_checkpoint_val},
           {"bad_epochs", s.bad_epochs},
           {"windows_trained", s.windows_trained},
           {"history", history}};
}

void from_json(const json& j, TrainerState& s) {
  s.epochs_completed = j.at("epochs_completed").get<Index>();
  s.learning_rate = j.at("learning_rate").get<double>();
  s.best_val = j.at("best_val").get<double>();
  s.best_checkpoint_val = j.value("best_checkpoint_val", s.best_val);
  s.bad_epochs = j.at("bad_epochs").get<Index>();
  s.windows_trained = j.value("windows_trained", std::int64_t{0});
  s.history.clear();
  for (const auto& e : j.at("history")) {
    s.history.push_back({e.at("epoch").get<Index>(), e.at("train_loss").get<double>(), e.at("val_loss").get<double>(),
                         e.at("lr").get<double>()});
  }
}

}  // namespace fcnbc
