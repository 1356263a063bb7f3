// Copyright 2026 The StepGAN Workbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <limits>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stepgan/stepgan.hpp"

namespace stepgan {
namespace {

ModelConfig tiny() {
  ModelConfig mc;
  mc.embed_dim = 8;
  mc.hidden_dim = 16;
  return mc;
}

TrainingConfig quick() {
  TrainingConfig c;
  c.batch_size = 8;
  c.d_iterations = 2;
  c.total_iterations = 6;
  c.d_pretrain_steps = 3;
  c.value_pretrain_steps = 2;
  c.seed = 9;
  return c;
}

const std::vector<CountingExample>& data() {
  static const auto ds = generate_dataset(4, {200, 40, 40}, 10);
  return ds.train;
}

template <typename Net>
std::vector<double> weights_of(const Net& n) {
  return oracle::flatten(n.params());
}

TEST(Mle, MemorizesASingleExample) {
  const std::vector<CountingExample> one{{DigitSequence({4, 7, 2}), {1, 7, 1}}};
  Generator<float> g(tiny(), 1);
  TrainingConfig cfg;
  cfg.batch_size = 4;
  cfg.mle_learning_rate = 1e-2;
  cfg.mle_max_iterations = 400;
  cfg.mle_eval_interval = 50;
  cfg.mle_patience = 100;
  const double before = mean_nll(g, one, cfg.max_len);
  const auto result = pretrain_mle(g, one, one, cfg);
  EXPECT_LT(result.best_valid_loss, 0.05);
  EXPECT_LT(result.best_valid_loss, before);
  const auto y = decode_argmax(g, one.front().input.tokens());
  EXPECT_EQ(y, (TokenSequence{1, 7, 1}));
}

TEST(Mle, EarlyStopKeepsTheBestParameters) {
  Generator<float> g(tiny(), 2);
  TrainingConfig cfg;
  cfg.batch_size = 16;
  cfg.mle_learning_rate = 5e-2;  // noisy enough to overshoot on a small set
  cfg.mle_max_iterations = 300;
  cfg.mle_eval_interval = 20;
  cfg.mle_patience = 2;
  const auto valid = generate_dataset(4, {200, 40, 40}, 10).valid;
  TrainingHistory history;
  const auto result = pretrain_mle(g, data(), valid, cfg, &history);
  EXPECT_NEAR(mean_nll(g, valid, cfg.max_len, cfg.mle_valid_examples), result.best_valid_loss, 1e-5);
  EXPECT_LE(result.best_iteration, result.iterations);
  EXPECT_FALSE(history.records().empty());
}

TEST(Mle, IsDeterministic) {
  TrainingConfig cfg;
  cfg.batch_size = 8;
  cfg.mle_max_iterations = 30;
  cfg.mle_eval_interval = 10;
  Generator<float> a(tiny(), 3), b(tiny(), 3);
  TrainingHistory ha, hb;
  pretrain_mle(a, data(), data(), cfg, &ha);
  pretrain_mle(b, data(), data(), cfg, &hb);
  EXPECT_EQ(weights_of(a), weights_of(b));
  EXPECT_EQ(ha.dump(), hb.dump());
}

TEST(Discriminator, ZeroPretrainingStepsLeaveItUnchanged) {
  const Generator<float> g(tiny(), 4);
  StepScorer<float> d(tiny(), ScorerRole::kDiscriminator, 5);
  const auto before = weights_of(d);
  Optimizer<float> opt(quick().gan_optimizer());
  Rng rng(6);
  pretrain_discriminator(d, g, data(), StrategyConfig::defaults(StrategyKind::kStepGan), quick(), opt, rng, 0);
  EXPECT_EQ(weights_of(d), before);
}

TEST(Discriminator, SeparatesRealFromAnUntrainedGenerator) {
  ModelConfig mc = tiny();
  mc.hidden_dim = 32;
  const Generator<float> g(mc, 7);
  StepScorer<float> d(mc, ScorerRole::kDiscriminator, 8);
  TrainingConfig cfg = quick();
  cfg.batch_size = 32;
  cfg.gan_learning_rate = 3e-3;
  Optimizer<float> opt(cfg.gan_optimizer());
  Rng rng(9);
  for (auto kind : {StrategyKind::kSeqGan, StrategyKind::kStepGan}) {
    StepScorer<float> dk = d;
    Optimizer<float> ok = opt;
    const auto last = pretrain_discriminator(dk, g, data(), StrategyConfig::defaults(kind), cfg, ok, rng, 300);
    EXPECT_GT(last.mean_real - last.mean_fake, 0.2) << to_string(kind);
  }
}

TEST(ValueNetwork, RegressesToConstantTargets) {
  StepScorer<double> v(tiny(), ScorerRole::kValue, 10);
  Optimizer<double> opt({OptimizerKind::kAdam, 1e-2, 5.0});
  const std::vector<TokenSequence> xs{{1, 2, 3}, {4}, {5, 5}};
  const std::vector<TokenSequence> ys{{0, 1, 11}, {0, 4, 0, 11}, {1, 5, 11}};
  std::vector<StepScores> targets;
  for (const auto& y : ys) targets.emplace_back(y.size(), 0.5);
  const double first = update_value_network(v, opt, xs, ys, targets);
  double last = first;
  for (int i = 0; i < 300; ++i) last = update_value_network(v, opt, xs, ys, targets);
  EXPECT_LT(last, first);
  EXPECT_LT(last, 1e-4);
  for (const auto& s : v.scores(xs, ys)) {
    for (double e : s) EXPECT_NEAR(e, 0.5, 0.02);
  }
}

TEST(ValueNetwork, TargetsDoNotReachTheDiscriminator) {
  const Generator<double> g(tiny(), 11);
  const StepScorer<double> d(tiny(), ScorerRole::kDiscriminator, 12);
  StepScorer<double> v(tiny(), ScorerRole::kValue, 13);
  const auto d_before = weights_of(d);
  const auto v_before = weights_of(v);
  Optimizer<double> opt(quick().gan_optimizer());
  Rng rng(14);
  const std::vector<TokenSequence> xs{{3, 1}, {8, 8, 2}};
  const auto ys = decode(g, xs, nullptr, DecodeMode::kSample, &rng, vocab::kDefaultMaxLen);
  update_value_network(v, opt, xs, ys, d.scores(xs, ys));
  EXPECT_EQ(weights_of(d), d_before);
  EXPECT_NE(weights_of(v), v_before);
}

TEST(GanTrainer, ZeroIterationsLeaveTheGeneratorUnchanged) {
  const Generator<float> g(tiny(), 15);
  auto cfg = quick();
  cfg.total_iterations = 0;
  auto trainer = GanTrainer<float>::fresh(g, StrategyConfig::defaults(StrategyKind::kStepGanW), cfg, data());
  trainer.pretrain();
  TrainingHistory history;
  int snapshots = 0;
  train_gan(trainer, history, 500, [&](long) { ++snapshots; });
  EXPECT_EQ(weights_of(trainer.generator()), weights_of(g));
  EXPECT_EQ(trainer.iteration(), 0);
  EXPECT_EQ(snapshots, 0);
}

TEST(GanTrainer, RejectsMle) {
  EXPECT_THROW(GanTrainer<float>::fresh(Generator<float>(tiny(), 1), StrategyConfig::defaults(StrategyKind::kMle),
                                        quick(), data()),
               std::invalid_argument);
}

TEST(GanTrainer, EveryStrategyRunsAndMovesTheGenerator) {
  const Generator<float> g(tiny(), 16);
  for (auto kind : {StrategyKind::kSeqGan, StrategyKind::kRegs, StrategyKind::kMcts, StrategyKind::kMaskGan,
                    StrategyKind::kStepGan, StrategyKind::kStepGanW}) {
    auto trainer = GanTrainer<float>::fresh(g, StrategyConfig::defaults(kind), quick(), data());
    trainer.pretrain();
    TrainingHistory history;
    std::vector<long> snaps;
    train_gan(trainer, history, 4, [&](long it) { snaps.push_back(it); });
    EXPECT_EQ(snaps, (std::vector<long>{4, 6})) << to_string(kind);
    EXPECT_NE(weights_of(trainer.generator()), weights_of(g)) << to_string(kind);
    const auto& last = history.records().back();
    EXPECT_EQ(last["iteration"], 6);
    EXPECT_EQ(last.contains("v_loss"), StrategyConfig::defaults(kind).baseline_enabled);
  }
}

TEST(GanTrainer, IsDeterministic) {
  const Generator<float> g(tiny(), 17);
  auto run = [&] {
    auto t = GanTrainer<float>::fresh(g, StrategyConfig::defaults(StrategyKind::kMcts), quick(), data());
    TrainingHistory h;
    t.pretrain(&h);
    train_gan(t, h);
    return std::make_pair(weights_of(t.generator()), h.dump());
  };
  EXPECT_EQ(run(), run());
}

TEST(GanTrainer, ResumedRunMatchesAnUninterruptedOne) {
  const Generator<float> g(tiny(), 18);
  const auto strategy = StrategyConfig::defaults(StrategyKind::kStepGanW);
  auto full = GanTrainer<float>::fresh(g, strategy, quick(), data());
  full.pretrain();
  TrainingHistory hf;
  train_gan(full, hf);

  auto cfg = quick();
  cfg.total_iterations = 2;
  auto first = GanTrainer<float>::fresh(g, strategy, cfg, data());
  first.pretrain();
  TrainingHistory h1;
  train_gan(first, h1);
  const auto path = std::filesystem::temp_directory_path() / "stepgan_resume_test.ckpt";
  write_checkpoint(path, first.state());

  // A differently seeded trainer proves that everything comes from the file.
  auto other = quick();
  other.seed = 1234;
  auto resumed = GanTrainer<float>::fresh(Generator<float>(tiny(), 99), strategy, other, data());
  resumed.restore(read_checkpoint(path));
  std::filesystem::remove(path);
  EXPECT_EQ(resumed.iteration(), 2);
  while (resumed.iteration() < quick().total_iterations) resumed.step();

  EXPECT_EQ(weights_of(resumed.generator()), weights_of(full.generator()));
  EXPECT_EQ(weights_of(resumed.discriminator()), weights_of(full.discriminator()));
  EXPECT_EQ(weights_of(resumed.value()), weights_of(full.value()));
}

TEST(GanTrainer, RestoreRejectsAnotherStrategy) {
  auto a = GanTrainer<float>::fresh(Generator<float>(tiny(), 1), StrategyConfig::defaults(StrategyKind::kSeqGan),
                                    quick(), data());
  auto b = GanTrainer<float>::fresh(Generator<float>(tiny(), 1), StrategyConfig::defaults(StrategyKind::kRegs),
                                    quick(), data());
  EXPECT_THROW(b.restore(a.state()), std::runtime_error);
}

TEST(GanTrainer, NonFiniteUpdatesRaiseDivergence) {
  auto cfg = quick();
  cfg.optimizer = OptimizerKind::kSgd;
  cfg.clip_norm = 0.0;
  cfg.gan_learning_rate = std::numeric_limits<double>::max();
  auto trainer = GanTrainer<float>::fresh(Generator<float>(tiny(), 19), StrategyConfig::defaults(StrategyKind::kRegs),
                                          cfg, data());
  TrainingHistory history;
  EXPECT_THROW(train_gan(trainer, history), DivergenceError);
}

TEST(TrainingConfig, Validation) {
  auto c = quick();
  c.d_iterations = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = quick();
  c.gan_learning_rate = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = quick();
  c.total_iterations = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace stepgan
