#include <fstream>

#include "doctest.h"

#include "fcnbc/checkpoint.hpp"
#include "fcnbc/pde_sim.hpp"
#include "fcnbc/train.hpp"
#include "finite_diff.hpp"
#include "test_support.hpp"

using namespace fcnbc;
using fcnbc::testing::Gen;

namespace {

std::vector<SimulationRecord> small_records(Index count, Index frames, std::uint64_t seed) {
  DatasetSpec s;
  s.n = 16;
  s.frames = frames;
  s.half_width = 3;
  s.seed = seed;
  ICConfig ic = ic_config(s);
  std::vector<SimulationRecord> out;
  for (Index i = 0; i < count; ++i) out.push_back(make_record(s, sample_pulses(ic, s.n, i), seed + i, frames));
  return out;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.batch_size = 4;
  c.max_epochs = 2;
  c.seed = 3;
  c.lr0 = 1e-3;
  return c;
}

MSNet<float> tiny_net(PadKind pk = PadKind::replicate, bool context = false) {
  MSNetConfig cfg = MSNetConfig::uniform(2, 3, pk, context);
  cfg.seed = 11;
  return MSNet<float>::build(cfg);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("gradient difference loss") {
  TensorD pred(1, 1, 2, 2);
  pred(0, 0, 0, 1) = 1.0;
  pred(0, 0, 1, 1) = 1.0;
  const TensorD zero(1, 1, 2, 2);
  CHECK(std::abs(gdl_loss(pred, zero) - 1.0) <= 1e-12);
  CHECK(gdl_loss(pred, pred) == 0.0);
  CHECK(std::abs(mse_loss(pred, zero) - 0.5) <= 1e-12);
  CHECK(std::abs(combined_loss(pred, zero, LossWeights{}) - (0.02 * 0.5 + 0.98 * 1.0)) <= 1e-12);
  CHECK(std::abs(combined_loss(pred, zero, LossWeights{1.0, 0.0}) - 0.5) <= 1e-12);

  Gen g(1);
  for (int trial = 0; trial < 20; ++trial) {
    const TensorD t = g.tensor<double>({2, 1, g.integer(2, 8), g.integer(2, 8)});
    TensorD shifted = t;
    shifted.values() += g.uniform(-5, 5);
    CHECK(gdl_loss(shifted, t) <= 1e-12);
    CHECK(combined_loss(t, t, LossWeights{}) == 0.0);
    CHECK(combined_loss(g.tensor<double>(t.shape()), t, LossWeights{}) >= 0.0);
  }
  CHECK_THROWS_AS(gdl_loss(TensorD(1, 1, 2, 2), TensorD(1, 1, 2, 3)), ConfigError);
}

TEST_CASE("combined loss gradient matches central differences") {
  Gen g(2);
  TensorD pred = g.tensor<double>({2, 1, 5, 6});
  const TensorD target = g.tensor<double>(pred.shape());
  TensorD grad;
  const double value = combined_loss_grad(pred, target, LossWeights{}, grad);
  CHECK(std::abs(value - combined_loss(pred, target, LossWeights{})) <= 1e-14);
  CHECK(fcnbc::testing::fd_check(pred.data(), grad.data(), pred.size(),
                                 [&] { return combined_loss(pred, target, LossWeights{}); }) < 1e-7);
}

TEST_CASE("input assembly and normalization") {
  std::vector<Field2F> constant(4, Field2F::Constant(8, 8, 2.0f));
  const auto a = assemble_input<float>(constant, StrategyConfig{});
  CHECK(a.x.shape() == Shape4{1, 4, 8, 8});
  CHECK(a.x.values().abs().maxCoeff() == 0.0f);
  CHECK(a.stats.mean == doctest::Approx(2.0));
  CHECK(a.stats.std == 1.0);

  Gen g(3);
  std::vector<Field2F> frames;
  for (int i = 0; i < 4; ++i) frames.push_back(g.field<float>(8, 8, -2, 3));
  const NormStats s = window_stats(frames);
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& f : frames) {
    sum += f.cast<double>().sum();
    sq += f.cast<double>().square().sum();
  }
  const double n = 4 * 64;
  CHECK(s.mean == doctest::Approx(sum / n).epsilon(1e-12));
  CHECK(s.std == doctest::Approx(std::sqrt(sq / n - (sum / n) * (sum / n))).epsilon(1e-9));

  StrategyConfig ctx;
  ctx.method = Method::context;
  const auto c = assemble_input<float>(frames, ctx);
  CHECK(c.x.c() == 5);
  CHECK((c.x.plane(0, 4).cast<double>() == make_context_mask(8, 8)).all());
  const auto implicit = assemble_input<float>(frames, StrategyConfig{});
  CHECK(std::abs(implicit.x.values().cast<double>().mean()) < 1e-6);
  // The target shares the window's statistics.
  const Field2F back = denormalize<float>(normalize<float>(frames[2], s), s);
  CHECK((back - frames[2]).abs().maxCoeff() < 1e-5f);
}

TEST_CASE("rotation augmentation") {
  Gen g(4);
  const Field2D f = g.field(6, 6);
  CHECK((rotate90(f, 0) == f).all());
  CHECK((rotate90(rotate90(rotate90(rotate90(f, 1), 1), 1), 1) == f).all());
  CHECK((rotate90(f, 2) == rotate90(rotate90(f, 1), 1)).all());
  // Counter-clockwise: the top-right corner moves to the top-left.
  CHECK(rotate90(f, 1)(0, 0) == f(0, 5));
  const Field2D mask = make_context_mask(6, 6);
  CHECK((rotate90(mask, 1) == mask).all());

  SimulationRecord r;
  for (int t = 0; t < 5; ++t) r.frames.push_back(g.field<float>(6, 6));
  const Window w = sample_window(r, 0, 4);
  const Window rot = augment_rotate(w, 3);
  for (std::size_t i = 0; i < 4; ++i) CHECK((rot.inputs[i] == rotate90(w.inputs[i], 3)).all());
  CHECK((rot.target == rotate90(w.target, 3)).all());
  CHECK((augment_rotate(w, 0).target == w.target).all());

  SimulationRecord wide;
  wide.frames.assign(5, Field2F::Zero(4, 8));
  CHECK_THROWS_AS(augment_rotate(sample_window(wide, 0, 4), 1), ConfigError);
}

TEST_CASE("plateau schedule") {
  TrainConfig cfg;
  TrainerState st;
  st.learning_rate = 1e-4;
  st.best_val = 1.0;
  CHECK(plateau_update(st, 0.5, cfg) == 1e-4);
  for (int i = 0; i < 9; ++i) CHECK(plateau_update(st, 0.4996, cfg) == 1e-4);
  CHECK(plateau_update(st, 0.4996, cfg) == doctest::Approx(8e-5).epsilon(1e-12));
  CHECK(st.bad_epochs == 0);
  CHECK(st.best_val == 0.5);

  st.learning_rate = 1.1e-6;
  for (int i = 0; i < 10; ++i) plateau_update(st, 1.0, cfg);
  CHECK(st.learning_rate == 1e-6);

  TrainConfig bad;
  bad.lr_decay = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("one epoch over a 6-frame record trains exactly two windows") {
  auto net = tiny_net();
  const auto recs = small_records(1, 6, 5);
  TrainConfig cfg = tiny_config();
  cfg.max_epochs = 1;
  const TrainResult r = train_records(net, recs, {}, cfg);
  CHECK(r.state.windows_trained == 2);
  CHECK(r.state.history.size() == 1);
  CHECK(r.adam.step_count == 1);
}

TEST_CASE("a small step lowers the loss of its batch") {
  auto net = tiny_net();
  const auto recs = small_records(1, 8, 6);
  TrainConfig cfg = tiny_config();
  cfg.augment_rotations = false;
  cfg.lr0 = 1e-6;
  cfg.batch_size = 4;
  cfg.max_epochs = 1;
  const auto windows = small_records(1, 5, 6);  // a single window: the whole epoch is one batch
  const double before = validation_loss(net, windows, cfg);
  train_records(net, windows, {}, cfg);
  CHECK(validation_loss(net, windows, cfg) < before);
}

TEST_CASE("training is deterministic and resumable") {
  const auto tr = small_records(3, 7, 7);
  const auto va = small_records(1, 7, 70);
  const auto a = fcnbc::testing::scratch_dir("train_a");
  const auto b = fcnbc::testing::scratch_dir("train_b");
  const auto c = fcnbc::testing::scratch_dir("train_c");
  TrainConfig cfg = tiny_config();

  auto na = tiny_net();
  const TrainResult ra = train_records(na, tr, va, cfg, TrainOptions{a});
  auto nb = tiny_net();
  train_records(nb, tr, va, cfg, TrainOptions{b});
  CHECK(slurp(a / "last.ckpt") == slurp(b / "last.ckpt"));
  CHECK(slurp(a / "best.ckpt") == slurp(b / "best.ckpt"));
  CHECK(slurp(a / "history.csv") == slurp(b / "history.csv"));

  // One epoch, then resume for the second: identical to the uninterrupted run.
  auto nc = tiny_net();
  TrainConfig first = cfg;
  first.max_epochs = 1;
  train_records(nc, tr, va, first, TrainOptions{c});
  auto nd = tiny_net();
  TrainOptions resume{c};
  resume.resume = true;
  const TrainResult rd = train_records(nd, tr, va, cfg, resume);
  CHECK(rd.state.epochs_completed == 2);
  CHECK(slurp(a / "last.ckpt") == slurp(c / "last.ckpt"));
  CHECK(slurp(a / "history.csv") == slurp(c / "history.csv"));
  CHECK(rd.state.history.back().val_loss == ra.state.history.back().val_loss);

  std::ifstream hist(a / "history.csv");
  std::string header;
  std::getline(hist, header);
  CHECK(header == "epoch,train_loss,val_loss,lr");

  TrainOptions missing{fcnbc::testing::scratch_dir("train_missing")};
  missing.resume = true;
  auto ne = tiny_net();
  CHECK_THROWS_AS(train_records(ne, tr, va, cfg, missing), ConfigError);
}

TEST_CASE("validation ignores augmentation") {
  const auto va = small_records(2, 7, 8);
  const auto net = tiny_net();
  TrainConfig on = tiny_config();
  TrainConfig off = on;
  off.augment_rotations = false;
  CHECK(validation_loss(net, va, on) == validation_loss(net, va, off));
}

TEST_CASE("training errors") {
  auto net = tiny_net();
  CHECK_THROWS_AS(train_records(net, {}, {}, tiny_config()), ConfigError);
  CHECK_THROWS_AS(train_records(net, small_records(1, 4, 1), {}, tiny_config()), ConfigError);

  TrainConfig ctx = tiny_config();
  ctx.strategy.method = Method::context;
  CHECK_THROWS_AS(train_records(net, small_records(1, 6, 1), {}, ctx), ConfigError);

  net.banks()[2][3].bias[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    train_records(net, small_records(1, 6, 1), {}, tiny_config());
    FAIL("expected a NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch 1") != std::string::npos);
  }
}

TEST_CASE("every strategy trains") {
  const auto tr = small_records(2, 6, 9);
  for (const char* name : {"implicit+zero", "context+reflect", "explicit:neumann+replicate",
                           "explicit:periodic_wrap+circular", "explicit:lodi+zero"}) {
    TrainConfig cfg = tiny_config();
    cfg.max_epochs = 1;
    cfg.strategy = parse_strategy(name);
    cfg.strategy.lodi.reset();
    if (cfg.strategy.rule == ExplicitRule::lodi) cfg.strategy.lodi = LodiParams{1.0, 0.25, 0.5};
    auto net = tiny_net(cfg.strategy.padding, cfg.strategy.method == Method::context);
    CAPTURE(name);
    const TrainResult r = train_records(net, tr, tr, cfg);
    CHECK(std::isfinite(r.state.history.back().val_loss));
  }
}
