#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "fcnbc/checkpoint.hpp"
#include "fcnbc/experiment.hpp"
#include "fcnbc/pde_sim.hpp"

namespace fs = std::filesystem;
using namespace fcnbc;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitDiverged = 4;

struct CommonArgs {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ExperimentConfig load(const CommonArgs& a) {
  if (!a.config.empty() && !a.preset.empty()) throw ConfigError("give either --config or --preset, not both");
  if (!a.config.empty()) return load_experiment(a.config);
  if (!a.preset.empty()) return preset(a.preset);
  throw ConfigError("one of --config or --preset is required");
}

fs::path manifest_path(const ExperimentConfig& c) { return c.dataset_dir / "manifest.json"; }

int cmd_generate(const CommonArgs& a) {
  ExperimentConfig c = load(a);
  if (a.seed) c.dataset.seed = *a.seed;
  if (!a.out.empty()) c.dataset_dir = a.out;
  c.validate();
  const DatasetManifest m = generate_dataset(c.dataset, c.dataset_dir);
  const auto tr = m.indices(Split::train).size();
  const auto va = m.indices(Split::validation).size();
  std::printf("wrote %zu records (%zu train / %zu validation), %lldx%lld, %lld frames each, to %s\n",
              m.records.size(), tr, va, static_cast<long long>(c.dataset.n), static_cast<long long>(c.dataset.n),
              static_cast<long long>(c.dataset.frames), c.dataset_dir.string().c_str());
  return 0;
}

int cmd_train(const CommonArgs& a, std::optional<Index> max_epochs, bool resume) {
  ExperimentConfig c = load(a);
  if (a.seed) {
    c.training.seed = *a.seed;
    c.model.seed = *a.seed;
  }
  if (max_epochs) c.training.max_epochs = *max_epochs;
  if (!a.out.empty()) c.out_dir = a.out;
  c.validate();
  if (!fs::exists(manifest_path(c))) throw Error("dataset not found: " + manifest_path(c).string());
  const DatasetManifest m = read_manifest(manifest_path(c));

  fs::create_directories(c.out_dir);
  save_experiment(c, c.out_dir / "config.json");
  MSNet<float> model = MSNet<float>::build(c.model);
  std::printf("network: %lld parameters, strategy %s\n", static_cast<long long>(model.parameter_count()),
              to_string(c.strategy()).c_str());
  TrainOptions opt;
  opt.out_dir = c.out_dir;
  opt.resume = resume;
  opt.on_epoch = [](const EpochStats& e) {
    std::printf("epoch %4lld  train %.6e  val %.6e  lr %.3e\n", static_cast<long long>(e.epoch), e.train_loss,
                e.val_loss, e.lr);
    std::fflush(stdout);
  };
  const TrainResult r = train(model, m, c.training, opt);
  std::printf("done: %lld epochs, best validation loss %.6e\n", static_cast<long long>(r.state.epochs_completed),
              r.state.best_checkpoint_val);
  return 0;
}

int cmd_rollout(const CommonArgs& a, std::optional<Index> cases, const std::string& checkpoint) {
  ExperimentConfig c = load(a);
  if (a.seed) c.eval_seed = *a.seed;
  if (cases) c.n_cases = *cases;
  c.validate();
  const fs::path ckpt = checkpoint.empty() ? c.out_dir / "best.ckpt" : fs::path(checkpoint);
  if (!fs::exists(ckpt)) throw Error("checkpoint not found: " + ckpt.string());
  const Checkpoint ck = load_checkpoint(ckpt);
  if (!(ck.model.config() == c.model)) {
    throw ConfigError("checkpoint network does not match the configured network");
  }
  const fs::path out = a.out.empty() ? c.out_dir / "eval" : fs::path(a.out);
  fs::create_directories(out);
  save_experiment(c, out / "config.json");

  const Index k = c.model.input_frames;
  const auto truth = evaluation_cases(c.dataset, c.n_cases, k + c.rollout.horizon, c.eval_seed);
  const EvalReport rep = evaluate(ck.model, truth, c.rollout);
  export_report(rep, out);
  const auto fin = rep.final_values(c.rollout.primary_metric);
  std::printf("%s: %lld cases, %lld diverged, final %s min %.4g max %.4g avg %.4g\n", rep.label.c_str(),
              static_cast<long long>(rep.cases.size()), static_cast<long long>(rep.diverged_count()),
              std::string(to_string(c.rollout.primary_metric)).c_str(), fin.min, fin.max, fin.avg);
  return rep.valid_count() == 0 ? kExitDiverged : 0;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const std::string table = merge_reports(paths);
  std::fputs(table.c_str(), stdout);
  if (!out.empty()) {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw Error("cannot open " + out + " for writing");
    f << table;
  }
  return 0;
}

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "Experiment config (JSON)");
  cmd->add_option("--preset", a.preset, "Start from a named preset instead of a config file");
  cmd->add_option("--seed", a.seed, "Override the seed used by this command");
  cmd->add_option("--out", a.out, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Training reallocates the same large activation buffers every step; keep
  // them on the heap instead of returning them to the kernel each time.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"Boundary-condition study for convolutional PDE surrogates"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, roll_args;
  std::optional<Index> max_epochs, cases;
  bool resume = false;
  std::string checkpoint, report_out;
  std::vector<std::string> report_dirs;

  auto* gen = app.add_subcommand("generate", "Simulate a dataset and write its manifest");
  add_common(gen, gen_args);
  auto* tr = app.add_subcommand("train", "Train a network on a generated dataset");
  add_common(tr, train_args);
  tr->add_option("--max-epochs", max_epochs, "Total number of epochs to reach");
  tr->add_flag("--resume", resume, "Continue from last.ckpt in the output directory");
  auto* ro = app.add_subcommand("rollout", "Auto-regressive evaluation against fresh simulations");
  add_common(ro, roll_args);
  ro->add_option("--cases", cases, "Number of evaluation cases");
  ro->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate (default: <out_dir>/best.ckpt)");
  auto* rep = app.add_subcommand("report", "Merge finished evaluations into one table");
  rep->add_option("dirs", report_dirs, "Evaluation directories holding summary.json")->required();
  rep->add_option("--out", report_out, "Also write the table to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(gen_args);
    if (*tr) return cmd_train(train_args, max_epochs, resume);
    if (*ro) return cmd_rollout(roll_args, cases, checkpoint);
    if (*rep) return cmd_report(report_dirs, report_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
