#include "boot/generation.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace boot {
namespace {

using testing::fit;
using testing::make_training_data;
using testing::small_model;

// One chain trajectory (4 steps x 4 tokens) memorized by a tiny model.
struct Memorized {
  TrainingData data;
  ModelParams params;
};

const Memorized& memorized() {
  static const Memorized m = [] {
    Memorized out{make_training_data("chain_mdp", Tier::kMedium, 1, 10, 4, 3), {}};
    out.params = init_params(small_model(10, 16, 16, 1, 5));
    const double nll = fit(out.params, testing::token_batch(out.data.tokens), 400, 1e-2);
    EXPECT_LT(nll, 0.01);
    return out;
  }();
  return m;
}

TEST(Generation, GreedyOnMemorizedModelReproducesSource) {
  const auto& m = memorized();
  const TokenSequence& src = m.data.tokens[0];
  GenerationConfig cfg;
  cfg.regen_steps = 1;
  cfg.policy = SamplingPolicy::kGreedy;
  Rng rng(1);
  EXPECT_EQ(generate_autoregressive(m.params, src, cfg, rng).tokens, src);
  EXPECT_EQ(generate_teacher_forcing(m.params, src, cfg, rng).tokens, src);
  cfg.regen_steps = 3;
  const auto tf = generate_teacher_forcing(m.params, src, cfg, rng);
  EXPECT_EQ(tf.tokens, src);
  EXPECT_GT(tf.confidence, -0.05);
}

TEST(Generation, PrefixIsPreservedAndSeedsReproduce) {
  const auto& m = memorized();
  const TokenSequence& src = m.data.tokens[0];
  for (auto scheme : {GenerationScheme::kAutoregressive, GenerationScheme::kTeacherForcing}) {
    GenerationConfig cfg;
    cfg.regen_steps = 2;
    cfg.scheme = scheme;
    cfg.seed = 17;
    const auto a = generate(m.params, src, cfg, 4);
    const auto b = generate(m.params, src, cfg, 4);
    EXPECT_EQ(a.tokens, b.tokens);
    EXPECT_EQ(a.confidence, b.confidence);
    EXPECT_EQ(a.source_id, 4);
    EXPECT_EQ(a.tokens.size(), src.size());
    const int start = regeneration_start(src.layout, src.steps(), 2);
    EXPECT_EQ(start, 8);
    for (int n = 0; n < start; ++n) EXPECT_EQ(a.tokens.tokens[n], src.tokens[n]);
    EXPECT_EQ(a.token_logprobs.size(), 8u);
    EXPECT_LE(a.confidence, 0.0);
  }
}

TEST(Generation, TeacherForcingUsesOneForwardPass) {
  const auto& m = memorized();
  GenerationConfig cfg;
  cfg.regen_steps = 3;
  std::vector<TokenSequence> sources(5, m.data.tokens[0]);
  std::vector<std::int64_t> ids{0, 1, 2, 3, 4};
  std::vector<Rng> rngs;
  for (int i = 0; i < 5; ++i) rngs.emplace_back(i);
  const auto before = forward_pass_count();
  const auto out = generate_teacher_forcing_batch(m.params, sources, ids, cfg, rngs);
  EXPECT_EQ(forward_pass_count() - before, 1u);
  EXPECT_EQ(out.size(), 5u);
  Rng rng(0);
  const auto before_single = forward_pass_count();
  generate_teacher_forcing(m.params, sources[0], cfg, rng);
  EXPECT_EQ(forward_pass_count() - before_single, 1u);
}

TEST(Generation, RejectsBadConfigAndLayouts) {
  const auto& m = memorized();
  GenerationConfig cfg;
  cfg.regen_steps = 4;  // == T
  Rng rng(0);
  EXPECT_THROW(generate_teacher_forcing(m.params, m.data.tokens[0], cfg, rng), InvalidInput);
  cfg.regen_steps = 0;
  EXPECT_THROW(generate_autoregressive(m.params, m.data.tokens[0], cfg, rng), InvalidInput);
  cfg.regen_steps = 1;
  TokenSequence other = m.data.tokens[0];
  other.layout = VocabLayout(1, 1, 12);
  EXPECT_THROW(generate_teacher_forcing(m.params, other, cfg, rng), InvalidInput);
}

TEST(Confidence, Examples) {
  const VocabLayout lay(1, 1, 4);  // 4 tokens per step
  EXPECT_EQ(confidence(std::vector<double>(4, 0.0), lay, 1), 0.0);
  const std::vector<double> lp{std::log(0.5), std::log(0.25)};
  EXPECT_NEAR(mean_logprob(lp), -1.0397207708399179, 1e-12);
  EXPECT_THROW(confidence(lp, lay, 1), InvalidInput);

  ModelConfig c = small_model(10, 16);
  c.init_scale = 0.0;
  const ModelParams zero = init_params(c);
  const auto& src = memorized().data.tokens[0];
  GenerationConfig cfg;
  cfg.regen_steps = 2;
  Rng rng(3);
  EXPECT_NEAR(generate_teacher_forcing(zero, src, cfg, rng).confidence, -std::log(10.0), 1e-12);
  const auto table = forward_logprobs(zero, src);
  EXPECT_NEAR(confidence(table, src.tokens, src.layout, 2), -std::log(10.0), 1e-12);
}

TEST(Selection, FloorCountsAndTieBreak) {
  std::vector<double> c{-1.0, -0.5, -3.0, -0.1, -2.0, -0.7, -0.9, -4.0, -0.2, -1.5};
  EXPECT_EQ(select_top_confidence(c, 20.0), (std::vector<size_t>{3, 8}));
  EXPECT_TRUE(select_top_confidence(c, 5.0).empty());
  std::vector<double> ties(10, -1.0);
  EXPECT_EQ(select_top_confidence(ties, 30.0), (std::vector<size_t>{0, 1, 2}));
  EXPECT_EQ(selection_count(16, 25.0), 4);
  EXPECT_THROW(selection_count(16, 101.0), InvalidInput);
  Rng rng(8);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(1 + trial);
    for (double& x : v) x = std::round(n(rng) * 4) / 4;
    const auto sel = select_top_confidence(v, 37.0);
    std::vector<bool> in(v.size(), false);
    for (size_t i : sel) in[i] = true;
    for (size_t i : sel)
      for (size_t j = 0; j < v.size(); ++j)
        if (!in[j]) EXPECT_GE(v[i], v[j]);
  }
}

double disagreement(const GeneratedTrajectory& g, const TokenSequence& src) {
  int diff = 0;
  for (int n = 0; n < src.size(); ++n) diff += g.tokens.tokens[n] != src.tokens[n];
  return diff;
}

TEST(Generation, AutoregressiveDivergesAtLeastAsMuchAsTeacherForcing) {
  const TrainingData data = make_training_data("point_chase", Tier::kMedium, 100, 20, 10, 21);
  ModelParams params = init_params(small_model(20, 80, 16, 1, 4));
  std::vector<std::vector<int>> batch;
  for (int i = 0; i < 32; ++i) batch.push_back(data.tokens[i].tokens);
  fit(params, batch, 40, 3e-3);
  GenerationConfig cfg;
  cfg.regen_steps = 3;
  double ar = 0.0, tf = 0.0;
  for (int i = 0; i < 100; ++i) {
    Rng a(1000 + i), b(1000 + i);
    ar += disagreement(generate_autoregressive(params, data.tokens[i], cfg, a), data.tokens[i]);
    const auto g = generate_teacher_forcing(params, data.tokens[i], cfg, b);
    tf += disagreement(g, data.tokens[i]);
    const AugmentedTrajectory back = data.discretizer.reconstruct(g.tokens);
    for (double v : back.states.values) ASSERT_TRUE(std::isfinite(v));
  }
  EXPECT_GE(ar, tf);
}

}  // namespace
}  // namespace boot
