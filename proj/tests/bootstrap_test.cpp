#include "boot/bootstrap.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace boot {
namespace {

using testing::make_training_data;
using testing::small_model;

// 128 chain windows of 4 steps (16 tokens) over 8 bins.
const TrainingData& chain_data() {
  static const TrainingData d = make_training_data("chain_mdp", Tier::kRandom, 128, 8, 4, 2);
  return d;
}

ModelParams chain_model() { return init_params(small_model(8, 16, 8, 1, 3)); }

BootstrapConfig bookkeeping_config(const std::string& scheme) {
  BootstrapConfig c;
  c.scheme = Scheme::parse(scheme);
  c.epochs = 10;
  c.threshold = 0.4;
  c.batch_size = 16;  // 128 windows -> B = 8 batches, K = 16
  c.eta_percent = 25.0;
  c.learning_rate = 1e-3;
  return c;
}

std::string without_scheme(const std::vector<EpochLog>& log) {
  std::string out;
  for (auto row : log) {
    row.scheme.clear();
    out += run_log_row(row) + "\n";
  }
  return out;
}

TEST(Scheme, NamesRoundTrip) {
  for (const auto& n : scheme_names()) EXPECT_EQ(Scheme::parse(n).name(), n);
  EXPECT_EQ(Scheme::parse("boot-o").name(), "boot-o-tf");
  EXPECT_THROW(Scheme::parse("boot-x"), ConfigError);
}

TEST(BootstrapConfig, ValidatesAndRoundTrips) {
  BootstrapConfig c = bookkeeping_config("boot-r-ar");
  KeyValueText kv;
  c.write(kv);
  const BootstrapConfig back = BootstrapConfig::read(kv);
  EXPECT_EQ(back.scheme, c.scheme);
  EXPECT_EQ(back.epochs, 10);
  EXPECT_EQ(back.eta_percent, 25.0);
  EXPECT_EQ(back.threshold_epoch(), 4);
  c.threshold = 1.5;
  c.epochs = 0;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("epochs"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("threshold"), std::string::npos);
  }
  BootstrapConfig d;
  d.scheme = Scheme::parse("boot-r");
  EXPECT_EQ(d.effective_eta(), 0.4);
  d.scheme = Scheme::parse("boot-o");
  EXPECT_EQ(d.effective_eta(), 4.0);
}

TEST(Bookkeeping, BootRepeatGrowsByBTimesSelection) {
  const BootstrapConfig cfg = bookkeeping_config("boot-r-tf");
  const auto res = train_run(chain_data(), chain_model(), cfg, 7);
  ASSERT_EQ(res.log.size(), 10u);
  // replay of the training loop counts
  std::int64_t expected = 128;
  for (int i = 1; i <= 10; ++i) {
    if (i > 4) expected += 8 * 4;
    EXPECT_EQ(res.log[i - 1].dataset_size, expected) << "epoch " << i;
    EXPECT_EQ(res.log[i - 1].generated, i > 4 ? 8 * 16 : 0);
    EXPECT_EQ(res.log[i - 1].selected, i > 4 ? 32 : 0);
    if (i > 1) EXPECT_GE(res.log[i - 1].dataset_size, res.log[i - 2].dataset_size);
  }
  EXPECT_EQ(res.log.back().dataset_size, 128 + 6 * 32);
  EXPECT_EQ(res.appended.size(), 6u * 32u);
}

TEST(Bookkeeping, BootOnceKeepsDatasetSize) {
  const auto res = train_run(chain_data(), chain_model(), bookkeeping_config("boot-o-ar"), 7);
  for (const auto& row : res.log) {
    EXPECT_EQ(row.dataset_size, 128);
    if (row.epoch <= 4) {
      EXPECT_EQ(row.generated, 0);
      EXPECT_TRUE(std::isnan(row.mean_confidence));
    } else {
      EXPECT_EQ(row.selected, 32);
      EXPECT_LE(row.mean_confidence, 0.0);
    }
  }
  EXPECT_TRUE(res.appended.empty());
  EXPECT_EQ(res.state.step, 10 * 8 + 6 * 8);
  EXPECT_EQ(res.state.step, planned_optimizer_steps(bookkeeping_config("boot-o-ar"), 128));
}

TEST(Bookkeeping, ThresholdOneDegeneratesToBaseline) {
  BootstrapConfig boot = bookkeeping_config("boot-o-tf");
  boot.threshold = 1.0;
  const BootstrapConfig base = bookkeeping_config("tt-baseline");
  const auto a = train_run(chain_data(), chain_model(), boot, 11);
  const auto b = train_run(chain_data(), chain_model(), base, 11);
  EXPECT_EQ(without_scheme(a.log), without_scheme(b.log));
  EXPECT_EQ(a.params.values, b.params.values);
  for (const auto& row : a.log) EXPECT_EQ(row.generated, 0);
}

TEST(Bookkeeping, RetrainAndNoiseSchemesMatchBootOnceStepCount) {
  const auto ref = train_run(chain_data(), chain_model(), bookkeeping_config("boot-o-tf"), 5).state.step;
  for (const char* s : {"tt-retrain-random", "tt-retrain-lowest-loss", "tt-retrain-largest-loss", "tt-s4rl-all",
                        "tt-s4rl-last"}) {
    const auto res = train_run(chain_data(), chain_model(), bookkeeping_config(s), 5);
    EXPECT_EQ(res.state.step, ref) << s;
    for (const auto& row : res.log) EXPECT_EQ(row.selected, row.epoch > 4 ? 32 : 0) << s;
  }
  EXPECT_EQ(train_run(chain_data(), chain_model(), bookkeeping_config("tt-baseline"), 5).state.step, 80);
}

TEST(TrainRun, IdenticalInputsGiveIdenticalLogs) {
  BootstrapConfig cfg = bookkeeping_config("boot-r-ar");
  cfg.epochs = 6;
  const auto a = train_run(chain_data(), chain_model(), cfg, 3);
  const auto b = train_run(chain_data(), chain_model(), cfg, 3);
  EXPECT_EQ(run_log_csv(a.log), run_log_csv(b.log));
  EXPECT_EQ(a.params.values, b.params.values);
  const auto c = train_run(chain_data(), chain_model(), cfg, 4);
  EXPECT_NE(a.params.values, c.params.values);
}

TEST(TrainRun, RejectsIncompatibleInputs) {
  BootstrapConfig cfg = bookkeeping_config("boot-o-tf");
  cfg.regen_steps = 4;
  EXPECT_THROW(train_run(chain_data(), chain_model(), cfg, 1), InvalidInput);
  cfg.regen_steps = 1;
  EXPECT_THROW(train_run(chain_data(), init_params(small_model(9, 16)), cfg, 1), InvalidInput);
  TrainingData empty;
  EXPECT_THROW(train_run(empty, chain_model(), cfg, 1), InvalidInput);
}

TEST(S4rl, ZeroNoiseAndLastModeLeaveTokensAlone) {
  const auto& d = chain_data();
  std::vector<AugmentedTrajectory> batch(d.windows.begin(), d.windows.begin() + 10);
  Rng rng(1);
  const auto same = s4rl_augment(batch, d.discretizer, 0.0, S4rlMode::kAll, 1, rng);
  for (size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(same[i], d.tokens[i]);

  const TrainingData pc = make_training_data("point_chase", Tier::kMedium, 20, 100, 10, 4);
  std::vector<AugmentedTrajectory> pb(pc.windows.begin(), pc.windows.end());
  const auto noisy = s4rl_augment(pb, pc.discretizer, 0.2, S4rlMode::kLast, 3, rng);
  const int tps = pc.discretizer.layout().tokens_per_step();
  bool changed = false;
  for (size_t i = 0; i < pb.size(); ++i) {
    for (int n = 0; n < 7 * tps; ++n) ASSERT_EQ(noisy[i].tokens[n], pc.tokens[i].tokens[n]);
    for (int n = 7 * tps; n < noisy[i].size(); ++n) {
      const FieldKind kind = pc.discretizer.layout().position(n).kind;
      if (kind != FieldKind::kState) ASSERT_EQ(noisy[i].tokens[n], pc.tokens[i].tokens[n]);
      changed |= noisy[i].tokens[n] != pc.tokens[i].tokens[n];
    }
  }
  EXPECT_TRUE(changed);
  EXPECT_EQ(BootstrapConfig().s4rl_sigma, 3e-4);
}

TEST(RetrainSelect, Policies) {
  const std::vector<double> losses{3, 1, 2};
  Rng rng(1);
  const double eta = 100.0 / 3.0 + 1e-6;  // one of three
  EXPECT_EQ(retrain_select(losses, eta, RetrainPolicy::kLowest, rng), (std::vector<size_t>{1}));
  EXPECT_EQ(retrain_select(losses, eta, RetrainPolicy::kLargest, rng), (std::vector<size_t>{0}));
  Rng a(9), b(9);
  EXPECT_EQ(retrain_select(losses, 67.0, RetrainPolicy::kRandom, a), retrain_select(losses, 67.0, RetrainPolicy::kRandom, b));
  EXPECT_EQ(retrain_select(losses, 67.0, RetrainPolicy::kRandom, a).size(), 2u);
}

TEST(Training, MemorizesSixtyFourWindows) {
  const TrainingData d = make_training_data("point_chase", Tier::kMedium, 64, 100, 10, 8);
  ASSERT_EQ(d.size(), 64u);
  ModelParams params = init_params(small_model(100, 80, 32, 2, 2));
  const double initial = nll_loss(params, testing::token_batch(d.tokens));
  EXPECT_NEAR(initial, std::log(100.0), 0.2);
  const double final_nll = testing::fit(params, testing::token_batch(d.tokens), 200, 3e-3);
  RecordProperty("final_nll", std::to_string(final_nll));
  EXPECT_LT(final_nll, 0.25 * std::log(100.0));
}

}  // namespace
}  // namespace boot
