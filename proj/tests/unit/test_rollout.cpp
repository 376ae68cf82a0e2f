#include <fstream>

#include "doctest.h"

#include "fcnbc/pde_sim.hpp"
#include "fcnbc/rollout.hpp"
#include "fcnbc/train.hpp"
#include "test_support.hpp"

using namespace fcnbc;
using fcnbc::testing::Gen;
namespace fs = std::filesystem;

namespace {

DatasetSpec small_spec() {
  DatasetSpec s;
  s.n = 16;
  s.half_width = 3;
  s.seed = 4;
  return s;
}

// Plays back the ground truth: knows which case and step it is on from the call count.
Predictor oracle(std::span<const SimulationRecord> cases, Index k, Index horizon) {
  auto calls = std::make_shared<Index>(0);
  return [cases, k, horizon, calls](const Tensor<float>&) {
    const Index c = *calls / horizon;
    const Index t = *calls % horizon;
    ++*calls;
    const auto& frames = cases[static_cast<std::size_t>(c)].frames;
    const std::span<const Field2F> window(frames.data() + t, static_cast<std::size_t>(k));
    const NormStats s = window_stats(window);
    Tensor<float> out(1, 1, frames[0].rows(), frames[0].cols());
    out.plane(0, 0) = normalize<float>(frames[static_cast<std::size_t>(t + k)], s);
    return out;
  };
}

Predictor zero_model() {
  return [](const Tensor<float>& x) { return Tensor<float>(1, 1, x.h(), x.w()); };
}

CaseResult fake_case(std::vector<double> values, std::optional<Index> diverged = std::nullopt) {
  CaseResult c;
  c.series.assign(std::size(kAllMetrics), values);
  c.divergence_index = diverged;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Index line_count(const fs::path& p) {
  std::ifstream in(p);
  Index n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("error metrics") {
  Gen g(1);
  const Field2F truth = g.field<float>(8, 8);
  CHECK(rel_rmse(truth, truth) == 0.0);
  CHECK(rel_rmse(Field2F(2.0f * truth), truth) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rel_rmse(Field2F::Zero(8, 8), truth) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(rel_rmse(truth, Field2F::Zero(8, 8)), NumericError);
  CHECK_THROWS_AS(rel_rmse(truth, Field2F::Zero(8, 4)), ConfigError);

  const Field2F pred = g.field<float>(8, 8);
  CHECK(rel_rmse(Field2F(4.0f * pred), Field2F(4.0f * truth)) == doctest::Approx(rel_rmse(pred, truth)).epsilon(1e-6));

  CHECK(rel_rmse_initial(truth, truth, 3.0) == 0.0);
  CHECK(rel_rmse_initial(Field2F::Zero(8, 8), Field2F::Zero(8, 8), 3.0) == 0.0);
  CHECK(rel_rmse_initial(Field2F(2.0f * pred), Field2F(2.0f * truth), 3.0) ==
        doctest::Approx(2.0 * rel_rmse_initial(pred, truth, 3.0)).epsilon(1e-6));

  CHECK(t_rms(Field2F::Constant(5, 5, -3.0f)) == doctest::Approx(3.0));
  CHECK(t_rms(Field2F::Zero(5, 5)) == 0.0);
  Field2F checker(4, 4);
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 4; ++j) checker(i, j) = (i + j) % 2 ? 1.0f : -1.0f;
  }
  CHECK(t_rms(checker) == 1.0);
  CHECK(parse_metric("t_rms") == MetricKind::t_rms);
  CHECK_THROWS_AS(parse_metric("mae"), ConfigError);
}

TEST_CASE("energy correction") {
  Gen g(2);
  const Field2F f = g.field<float>(8, 8);
  const double e = l2_norm(f);
  CHECK((*energy_correction(f, e) - f).abs().maxCoeff() <= 1e-6f);
  CHECK((*energy_correction(Field2F(2.0f * f), e) - f).abs().maxCoeff() <= 1e-6f);
  for (int trial = 0; trial < 10; ++trial) {
    const Field2F p = g.field<float>(6, 6);
    const double target = g.uniform(0.1, 5.0);
    const Field2F c = *energy_correction(p, target);
    CHECK(l2_norm(c) == doctest::Approx(target).epsilon(1e-6));
    // Same direction: c is a non-negative multiple of p.
    const double s = (c.cast<double>() * p.cast<double>()).sum() / p.cast<double>().square().sum();
    CHECK(s >= 0.0);
    CHECK((c.cast<double>() - s * p.cast<double>()).abs().maxCoeff() <= 1e-6);
  }
  CHECK_FALSE(energy_correction(Field2F::Zero(4, 4), 1.0).has_value());
  CHECK(energy_correction(Field2F::Zero(4, 4), 0.0).has_value());
}

TEST_CASE("ground-truth playback has zero error") {
  const DatasetSpec spec = small_spec();
  const auto cases = evaluation_cases(spec, 3, 4 + 10, 9);
  RolloutConfig cfg;
  cfg.horizon = 10;
  const EvalReport rep = evaluate(oracle(cases, 4, 10), cases, 4, cfg);
  CHECK(rep.diverged_count() == 0);
  const auto agg = rep.aggregate(MetricKind::rel_rmse);
  for (std::size_t t = 0; t < 10; ++t) {
    CHECK(agg.mean[t] < 1e-5);
    CHECK(agg.std[t] < 1e-5);
  }
  // The last case is the centered pulse.
  CHECK(cases.back().pulses.size() == 1);
  CHECK(cases.back().pulses[0].x0 == 7.5);
}

TEST_CASE("zero network predicts the window mean") {
  Gen g(3);
  std::vector<Field2F> window;
  for (int i = 0; i < 4; ++i) window.push_back(g.field<float>(8, 8));
  RolloutConfig cfg;
  cfg.horizon = 6;
  const RolloutResult r = rollout(zero_model(), window, cfg);
  REQUIRE(r.frames.size() == 6);
  std::vector<Field2F> sliding = window;
  for (const auto& f : r.frames) {
    const double mean = window_stats(sliding).mean;
    CHECK((f.cast<double>() - mean).abs().maxCoeff() <= 1e-6);
    sliding.erase(sliding.begin());
    sliding.push_back(f);
  }
}

TEST_CASE("horizon one is a single prediction step and rollouts are deterministic") {
  Gen g(4);
  MSNetConfig mc = MSNetConfig::uniform(2, 2, PadKind::zero);
  mc.seed = 2;
  const auto net = MSNet<float>::build(mc);
  std::vector<Field2F> window;
  for (int i = 0; i < 4; ++i) window.push_back(g.field<float>(16, 16));
  RolloutConfig cfg;
  cfg.horizon = 1;
  const RolloutResult one = rollout(net, window, cfg);
  const Field2F step = predict_next([&](const Tensor<float>& x) { return net.forward(x); }, window, cfg.strategy);
  REQUIRE(one.frames.size() == 1);
  CHECK((one.frames[0] == step).all());

  cfg.horizon = 5;
  const RolloutResult a = rollout(net, window, cfg);
  const RolloutResult b = rollout(net, window, cfg);
  for (std::size_t i = 0; i < 5; ++i) CHECK((a.frames[i] == b.frames[i]).all());
  CHECK_THROWS_AS(rollout(net, std::span<const Field2F>(window).first(3), cfg), ConfigError);
}

TEST_CASE("explicit rules act on the physical previous frame") {
  Gen g(5);
  std::vector<Field2F> window;
  for (int i = 0; i < 4; ++i) window.push_back(g.field<float>(8, 8));
  StrategyConfig s = parse_strategy("explicit:lodi+zero");
  s.lodi = LodiParams{1.0, 0.5, 0.5};
  const Field2F next = predict_next(zero_model(), window, s);
  for (Index i = 1; i < 7; ++i) CHECK(next(i, 0) == doctest::Approx(window.back()(i, 1)).epsilon(1e-6));
  const double mean = window_stats(window).mean;
  CHECK(next(3, 3) == doctest::Approx(mean).epsilon(1e-5));
}

TEST_CASE("divergence detection") {
  Gen g(6);
  std::vector<Field2F> window;
  for (int i = 0; i < 4; ++i) window.push_back(g.field<float>(8, 8));
  RolloutConfig cfg;
  cfg.horizon = 20;
  // Each step multiplies the window spread: the normalized output is a large constant pattern.
  const Predictor blowup = [](const Tensor<float>& x) {
    Tensor<float> out(1, 1, x.h(), x.w());
    out.plane(0, 0) = 100.0f * x.plane(0, 3);
    return out;
  };
  const RolloutResult r = rollout(blowup, window, cfg);
  REQUIRE(r.diverged());
  CHECK(*r.divergence_index >= 1);
  CHECK(static_cast<Index>(r.frames.size()) == *r.divergence_index - 1);

  const Predictor nan = [](const Tensor<float>& x) {
    return Tensor<float>::constant({1, 1, x.h(), x.w()}, std::numeric_limits<float>::quiet_NaN());
  };
  const RolloutResult rn = rollout(nan, window, cfg);
  CHECK(rn.divergence_index == Index{1});
  CHECK(rn.frames.empty());

  cfg.energy_correction = true;
  const Predictor zero_out = [](const Tensor<float>& x) {
    return Tensor<float>(1, 1, x.h(), x.w());
  };
  // A zero-mean window makes the denormalized prediction exactly zero, which cannot be rescaled.
  std::vector<Field2F> zeros(4, Field2F::Zero(8, 8));
  zeros[0](2, 2) = 1.0f;
  zeros[1](2, 2) = -1.0f;
  zeros[3](1, 1) = 1.0f;
  zeros[3](1, 2) = -1.0f;
  const RolloutResult rz = rollout(zero_out, zeros, cfg);
  CHECK(rz.corrections_skipped >= 1);
}

TEST_CASE("aggregation bookkeeping") {
  EvalReport rep;
  rep.config.horizon = 2;
  rep.cases.push_back(fake_case({0.1, 0.3}));
  rep.cases.push_back(fake_case({0.2, 0.5}));
  rep.cases.push_back(fake_case({0.9}, Index{2}));
  CHECK(rep.diverged_count() == 1);
  CHECK(rep.valid_count() == 2);
  const auto f = rep.final_values(MetricKind::rel_rmse);
  CHECK(f.avg == doctest::Approx(0.4));
  CHECK(f.min == doctest::Approx(0.3));
  CHECK(f.max == doctest::Approx(0.5));
  const auto agg = rep.aggregate(MetricKind::rel_rmse);
  CHECK(agg.std[0] == doctest::Approx(0.05));

  EvalReport swapped = rep;
  std::swap(swapped.cases[0], swapped.cases[2]);
  const auto agg2 = swapped.aggregate(MetricKind::rel_rmse);
  for (std::size_t t = 0; t < 2; ++t) {
    CHECK(agg2.mean[t] == doctest::Approx(agg.mean[t]).epsilon(1e-15));
    CHECK(agg2.std[t] == doctest::Approx(agg.std[t]).epsilon(1e-12));
  }

  EvalReport all_bad;
  all_bad.config.horizon = 2;
  all_bad.cases.push_back(fake_case({1.0}, Index{2}));
  CHECK(std::isnan(all_bad.final_values(MetricKind::rel_rmse).avg));
}

TEST_CASE("report export") {
  const DatasetSpec spec = small_spec();
  const auto cases = evaluation_cases(spec, 3, 4 + 7, 11);
  RolloutConfig cfg;
  cfg.horizon = 7;
  EvalReport rep = evaluate(zero_model(), cases, 4, cfg);
  rep.cases[1].divergence_index = 5;  // pretend a case blew up

  const auto dir = fcnbc::testing::scratch_dir("export");
  export_report(rep, dir);
  for (MetricKind k : kAllMetrics) {
    const fs::path csv = dir / ("metric_" + std::string(to_string(k)) + ".csv");
    REQUIRE(fs::exists(csv));
    CHECK(line_count(csv) == cfg.horizon + 1);
  }
  std::ifstream in(dir / "metric_rel_rmse.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,mean,std,min,max,case_0,case_1,case_2");
  CHECK(fs::exists(dir / "summary.txt"));
  CHECK(slurp(dir / "summary.txt").find("inf") != std::string::npos);
  CHECK(fs::exists(dir / "summary.json"));
  CHECK_FALSE(fs::is_empty(dir / "snapshots"));

  const std::string first = slurp(dir / "metric_rel_rmse.csv");
  export_report(rep, dir);
  CHECK(slurp(dir / "metric_rel_rmse.csv") == first);

  const fs::path dirs[] = {dir};
  const std::string table = merge_reports(dirs);
  CHECK(table.find("inf") != std::string::npos);
}

TEST_CASE("snapshot images") {
  const auto dir = fcnbc::testing::scratch_dir("pgm");
  write_pgm(Field2F::Constant(4, 6, 2.0f), 2.0, 2.0, dir / "c.pgm");
  const std::string bytes = slurp(dir / "c.pgm");
  REQUIRE(bytes.size() >= 24);
  const std::string pixels = bytes.substr(bytes.size() - 24);
  CHECK(std::all_of(pixels.begin(), pixels.end(), [&](char c) { return c == pixels[0]; }));
  CHECK(bytes.rfind("P5", 0) == 0);

  Field2F ramp(1, 4);
  ramp << 0.0f, 1.0f, 2.0f, 3.0f;
  write_pgm(ramp, 0.0, 3.0, dir / "r.pgm");
  const std::string r = slurp(dir / "r.pgm");
  CHECK(static_cast<unsigned char>(r[r.size() - 4]) == 0);
  CHECK(static_cast<unsigned char>(r[r.size() - 1]) == 255);
}
