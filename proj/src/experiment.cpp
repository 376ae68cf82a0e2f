#include "fcnbc/experiment.hpp"

#include <fstream>
#include <set>

#include "fcnbc/json_config.hpp"
#include "fcnbc/pde_sim.hpp"

namespace fcnbc {

namespace fs = std::filesystem;
using nlohmann::json;

ExplicitRule rule_for(BoundaryKind bc) {
  switch (bc) {
    case BoundaryKind::reflecting: return ExplicitRule::neumann;
    case BoundaryKind::periodic: return ExplicitRule::periodic_wrap;
    case BoundaryKind::absorbing: return ExplicitRule::lodi;
    case BoundaryKind::adiabatic: return ExplicitRule::neumann;
  }
  throw ConfigError("unknown boundary kind");
}

void ExperimentConfig::set_strategy(const StrategyConfig& s) {
  StrategyConfig r = s;
  if (r.rule == ExplicitRule::lodi) r.lodi = LodiParams{dataset.c0_or_alpha, dataset.dt_frame(), dataset.dx};
  training.strategy = r;
  rollout.strategy = r;
  model.padding_mode = r.padding;
  model.context_channel = r.method == Method::context;
}

void ExperimentConfig::validate() const {
  fcnbc::validate(dataset);
  model.validate();
  training.validate();
  rollout.validate();
  if (n_cases < 1) throw ConfigError("n_cases must be >= 1");
  const auto& s = strategy();
  if (s.method == Method::explicit_encoding && s.rule != rule_for(dataset.bc)) {
    throw ConfigError(std::string("explicit rule ") + std::string(to_string(*s.rule)) + " does not match " +
                      std::string(to_string(dataset.bc)) + " walls (expected " +
                      std::string(to_string(rule_for(dataset.bc))) + ")");
  }
  if (model.padding_mode != s.padding || model.context_channel != (s.method == Method::context)) {
    throw ConfigError("model padding/context channel disagree with the strategy " + to_string(s));
  }
  if (rollout.strategy.method != s.method || rollout.strategy.padding != s.padding ||
      rollout.strategy.rule != s.rule) {
    throw ConfigError("rollout strategy differs from the training strategy");
  }
  if (dataset.frames < model.input_frames + 1) throw ConfigError("records are shorter than one training window");
}

namespace {

ExperimentConfig wave_full(BoundaryKind bc) {
  ExperimentConfig c;
  c.dataset.physics = Physics::wave;
  c.dataset.bc = bc;
  c.dataset.count = 600;
  c.dataset.train_count = 500;
  c.dataset.n = 200;
  c.dataset.frames = 231;
  c.dataset.dx = 0.5;
  c.dataset.dt = 0.25;
  c.dataset.c0_or_alpha = 1.0;
  c.dataset.frame_stride = 1;
  c.dataset.half_width = 12.0;
  c.model = MSNetConfig::full_scale(PadKind::replicate);
  c.rollout.horizon = 600;
  c.rollout.energy_correction = bc != BoundaryKind::absorbing;
  c.rollout.primary_metric = bc == BoundaryKind::absorbing ? MetricKind::rel_rmse_initial : MetricKind::rel_rmse;
  c.rollout.keep_frames = false;
  return c;
}

ExperimentConfig heat_full() {
  ExperimentConfig c;
  c.dataset.physics = Physics::heat;
  c.dataset.bc = BoundaryKind::adiabatic;
  c.dataset.count = 550;
  c.dataset.train_count = 400;
  c.dataset.n = 200;
  c.dataset.frames = 160;
  c.dataset.dx = 0.005;
  c.dataset.c0_or_alpha = 8.0 * 0.005 * 0.005;  // 8 dx^2 per lattice step of 1
  c.dataset.dt = 1.0 / 32.0;
  c.dataset.frame_stride = 128;  // 4 lattice steps per frame
  c.dataset.half_width = 12.0;
  c.model = MSNetConfig::full_scale(PadKind::replicate);
  c.rollout.horizon = 120;
  c.rollout.energy_correction = false;
  c.rollout.keep_frames = false;
  return c;
}

// Desk scale: 64 x 64 grid, 60 records, horizons and record lengths scaled by 64/200.
ExperimentConfig make_small(ExperimentConfig c) {
  c.dataset.count = 60;
  c.dataset.train_count = 50;
  c.dataset.n = 64;
  c.dataset.half_width = 8.0;
  if (c.dataset.physics == Physics::wave) {
    c.dataset.frames = 74;
    c.rollout.horizon = 200;
  } else {
    c.dataset.frames = 51;
    // Same fraction of the equilibration time per record: 10.24 dx^2 of diffusion per frame.
    c.dataset.frame_stride = 41;
    c.dataset.dt = 1.28 / 41.0;
    c.rollout.horizon = 38;
  }
  c.model = MSNetConfig::uniform(8, 16, PadKind::replicate);
  c.rollout.keep_frames = true;
  return c;
}

const std::set<std::string> kTopLevelKeys{"preset",   "dataset",  "dataset_dir", "model", "training",
                                          "strategy", "rollout",  "out_dir"};

}  // namespace

std::vector<std::string> preset_names() {
  return {"D1", "D2", "D3", "D4", "D1-small", "D2-small", "D3-small", "D4-small"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  const bool small = name.size() > 6 && name.substr(name.size() - 6) == "-small";
  const std::string base = small ? name.substr(0, name.size() - 6) : name;
  if (base == "D1") {
    c = wave_full(BoundaryKind::reflecting);
  } else if (base == "D2") {
    c = wave_full(BoundaryKind::periodic);
  } else if (base == "D3") {
    c = wave_full(BoundaryKind::absorbing);
  } else if (base == "D4") {
    c = heat_full();
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  if (small) c = make_small(std::move(c));
  c.preset = name;
  c.set_strategy(parse_strategy("implicit+replicate"));
  return c;
}

ExperimentConfig experiment_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!kTopLevelKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    ExperimentConfig c;
    if (doc.contains("preset")) c = preset(doc.at("preset").get<std::string>());
    StrategyConfig strategy = c.strategy();

    if (doc.contains("dataset")) {
      DatasetSpec d = c.dataset;
      from_json(doc.at("dataset"), d);
      c.dataset = d;
    }
    if (doc.contains("dataset_dir")) c.dataset_dir = doc.at("dataset_dir").get<std::string>();
    if (doc.contains("model")) {
      const auto& m = doc.at("model");
      if (m.contains("banks")) {
        c.model = m.get<MSNetConfig>();
      } else {
        const auto w = m.value("widths", std::vector<Index>{c.model.banks.at(0).layer_channels.at(0),
                                                            c.model.banks.at(0).layer_channels.at(1)});
        if (w.size() != 2) throw ConfigError("model.widths must hold two values [w1, w2]");
        const Index frames = m.value("input_frames", c.model.input_frames);
        const auto seed = m.value("seed", c.model.seed);
        c.model = MSNetConfig::uniform(w[0], w[1], c.model.padding_mode, c.model.context_channel, frames);
        c.model.seed = seed;
      }
    }
    if (doc.contains("training")) {
      json t = doc.at("training");
      if (t.contains("strategy")) throw ConfigError("set the strategy at the top level, not under training");
      // Keys absent from the document keep the preset's values.
      json merged = json(c.training);
      merged.update(t);
      c.training = merged.get<TrainConfig>();
    }
    if (doc.contains("strategy")) strategy = doc.at("strategy").get<StrategyConfig>();
    c.set_strategy(strategy);
    if (doc.contains("rollout")) {
      const auto& r = doc.at("rollout");
      c.rollout.horizon = r.value("horizon", c.rollout.horizon);
      c.rollout.energy_correction = r.value("energy_correction", c.rollout.energy_correction);
      c.rollout.divergence_factor = r.value("divergence_factor", c.rollout.divergence_factor);
      if (r.contains("primary_metric")) c.rollout.primary_metric = parse_metric(r.at("primary_metric").get<std::string>());
      c.rollout.keep_frames = r.value("keep_frames", c.rollout.keep_frames);
      c.n_cases = r.value("n_cases", c.n_cases);
      c.eval_seed = r.value("eval_seed", c.eval_seed);
    }
    if (doc.contains("out_dir")) c.out_dir = doc.at("out_dir").get<std::string>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json experiment_to_json(const ExperimentConfig& c) {
  json model = c.model;
  model.erase("padding");
  model.erase("context_channel");
  json training = c.training;
  training.erase("strategy");
  json doc{{"dataset", c.dataset},
           {"dataset_dir", c.dataset_dir.string()},
           {"model", model},
           {"training", training},
           {"strategy", c.strategy()},
           {"rollout",
            {{"horizon", c.rollout.horizon},
             {"energy_correction", c.rollout.energy_correction},
             {"divergence_factor", c.rollout.divergence_factor},
             {"primary_metric", to_string(c.rollout.primary_metric)},
             {"keep_frames", c.rollout.keep_frames},
             {"n_cases", c.n_cases},
             {"eval_seed", c.eval_seed}}},
           {"out_dir", c.out_dir.string()}};
  if (!c.preset.empty()) doc["preset"] = c.preset;
  return doc;
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  ExperimentConfig c = experiment_from_json(doc);
  // Relative paths are resolved against the config file's directory.
  const fs::path base = path.parent_path();
  if (c.dataset_dir.is_relative()) c.dataset_dir = base / c.dataset_dir;
  if (c.out_dir.is_relative()) c.out_dir = base / c.out_dir;
  return c;
}

void save_experiment(const ExperimentConfig& c, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << experiment_to_json(c).dump(2) << '\n';
}

}  // namespace fcnbc
