#include <cstdlib>
#include <fstream>

#include "doctest.h"

#include "fcnbc/experiment.hpp"
#include "test_support.hpp"

using namespace fcnbc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(FCNBC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

json tiny_config(const fs::path& dir) {
  return json{{"preset", "D1-small"},
              {"dataset", {{"n", 16}, {"count", 4}, {"train_count", 3}, {"frames", 8}, {"half_width", 3.0}}},
              {"dataset_dir", (dir / "data").string()},
              {"model", {{"widths", {2, 2}}}},
              {"training", {{"max_epochs", 1}, {"batch_size", 4}}},
              {"rollout", {{"horizon", 5}, {"n_cases", 2}}},
              {"out_dir", (dir / "run").string()}};
}

}  // namespace

TEST_CASE("presets are internally consistent") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const ExperimentConfig c = preset(name);
    CHECK_NOTHROW(c.validate());
    CHECK(c.dataset.n % 4 == 0);
    CHECK(c.preset == name);
  }
  CHECK(preset("D1").dataset.bc == BoundaryKind::reflecting);
  CHECK(preset("D2").dataset.bc == BoundaryKind::periodic);
  CHECK(preset("D3").dataset.bc == BoundaryKind::absorbing);
  CHECK(preset("D4").dataset.physics == Physics::heat);
  CHECK(preset("D3").rollout.primary_metric == MetricKind::rel_rmse_initial);
  CHECK_FALSE(preset("D3").rollout.energy_correction);
  CHECK(preset("D1").rollout.energy_correction);
  CHECK_THROWS_AS(preset("D5"), ConfigError);
}

TEST_CASE("experiment JSON round trip") {
  for (const std::string strat : {"implicit+zero", "context+circular", "explicit:neumann+replicate"}) {
    ExperimentConfig c = preset("D1-small");
    c.set_strategy(parse_strategy(strat));
    c.training.lr0 = 3e-4;
    c.n_cases = 9;
    const json doc = experiment_to_json(c);
    const ExperimentConfig back = experiment_from_json(doc);
    CHECK(experiment_to_json(back) == doc);
    CHECK(back.model == c.model);
    CHECK(to_string(back.strategy()) == strat);
  }
  const auto dir = fcnbc::testing::scratch_dir("exp_json");
  ExperimentConfig c = preset("D3-small");
  c.set_strategy(parse_strategy("explicit:lodi+zero"));
  REQUIRE(c.strategy().lodi.has_value());
  CHECK(c.strategy().lodi->dx == c.dataset.dx);
  c.dataset_dir = dir / "d";
  c.out_dir = dir / "o";
  save_experiment(c, dir / "c.json");
  CHECK(experiment_to_json(load_experiment(dir / "c.json")) == experiment_to_json(c));
}

TEST_CASE("config errors are reported as ConfigError") {
  CHECK_THROWS_AS(experiment_from_json(json{{"preset", "D1-small"}, {"learning_rate", 1}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json::array()), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"preset", "D1-small"}, {"strategy", {{"name", "explicit:lodi+zero"}}}}),
                  ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"preset", "D1-small"},
                                            {"training", {{"strategy", {{"name", "implicit+zero"}}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"preset", "D1-small"}, {"dataset", {{"n", 62}}}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"preset", "D1-small"}, {"dataset", {{"n", "big"}}}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"preset", "D2-small"}, {"dataset", {{"bc", "adiabatic"}}}}),
                  ConfigError);
  CHECK_THROWS_AS(load_experiment("/nonexistent/config.json"), ConfigError);

  const auto dir = fcnbc::testing::scratch_dir("exp_bad");
  std::ofstream(dir / "bad.json") << "{ \"preset\": ";
  CHECK_THROWS_AS(load_experiment(dir / "bad.json"), ConfigError);

  CHECK(rule_for(BoundaryKind::periodic) == ExplicitRule::periodic_wrap);
  CHECK(rule_for(BoundaryKind::absorbing) == ExplicitRule::lodi);
  CHECK(rule_for(BoundaryKind::adiabatic) == ExplicitRule::neumann);
}

TEST_CASE("command line exit codes and end-to-end run") {
  const auto dir = fcnbc::testing::scratch_dir("cli");
  const fs::path log = dir / "log.txt";
  CHECK(run_cli("", log) == 2);
  CHECK(run_cli("train --preset nope", log) == 2);
  CHECK(slurp(log).find("config error") != std::string::npos);
  CHECK(run_cli("generate --preset D1-small --config x.json", log) == 2);

  std::ofstream(dir / "cfg.json") << tiny_config(dir).dump(2);
  const std::string cfg = "--config " + (dir / "cfg.json").string();
  CHECK(run_cli("train " + cfg, log) == 3);  // no dataset yet
  CHECK(slurp(log).find("dataset not found") != std::string::npos);
  CHECK(run_cli("rollout " + cfg, log) == 3);  // no checkpoint yet

  REQUIRE(run_cli("generate " + cfg, log) == 0);
  CHECK(fs::exists(dir / "data" / "manifest.json"));
  REQUIRE(run_cli("train " + cfg, log) == 0);
  CHECK(fs::exists(dir / "run" / "best.ckpt"));
  CHECK(fs::exists(dir / "run" / "history.csv"));
  REQUIRE(run_cli("train " + cfg + " --max-epochs 2 --resume", log) == 0);
  CHECK(slurp(log).find("done: 2 epochs") != std::string::npos);
  REQUIRE(run_cli("rollout " + cfg, log) == 0);
  CHECK(fs::exists(dir / "run" / "eval" / "summary.json"));
  REQUIRE(run_cli("report " + (dir / "run" / "eval").string() + " --out " + (dir / "table.txt").string(), log) == 0);
  CHECK_FALSE(slurp(dir / "table.txt").empty());

  // A checkpoint from a different network is refused.
  json other = tiny_config(dir);
  other["model"]["widths"] = {3, 2};
  std::ofstream(dir / "other.json") << other.dump(2);
  CHECK(run_cli("rollout --config " + (dir / "other.json").string(), log) == 2);
}
