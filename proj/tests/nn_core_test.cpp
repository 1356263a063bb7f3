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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stepgan/stepgan.hpp"

namespace stepgan {
namespace {

ModelConfig tiny(Token eos = 3) {
  ModelConfig mc;
  mc.vocab_size = 4;
  mc.bos_id = 2;
  mc.eos_id = eos;
  mc.embed_dim = 3;
  mc.hidden_dim = 4;
  mc.init_scale = 0.5;
  return mc;
}

const std::vector<TokenSequence> kXs{{0, 1, 1}, {1}, {0, 0}};
const std::vector<TokenSequence> kYs{{1, 0, 3}, {0, 3}, {1, 1, 0, 1}};
const std::vector<TokenSequence> kFakes{{3}, {1, 1, 3}, {0, 1, 0}};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

double sigmoid_ref(double a) { return 1.0 / (1.0 + std::exp(-a)); }

TEST(Gru, OneUnitForwardMatchesHandComputation) {
  auto w = GruWeights<double>::zeros(1, 1);
  w.input_kernel << 0.5, -0.3, 0.8;
  w.hidden_kernel << 0.2, 0.4, -0.6;
  w.input_bias << 0.1, 0.0, -0.2;
  w.hidden_bias << 0.0, 0.3, 0.05;
  Matrix<double> x(1, 1), h(1, 1);
  x << 1.5;
  h << -0.4;
  Column<double> mask(1);
  mask << 1.0;

  const double r = sigmoid_ref(0.5 * 1.5 + 0.1 + 0.2 * -0.4 + 0.0);
  const double z = sigmoid_ref(-0.3 * 1.5 + 0.0 + 0.4 * -0.4 + 0.3);
  const double n = std::tanh(0.8 * 1.5 - 0.2 + r * (-0.6 * -0.4 + 0.05));
  const double expected = (1.0 - z) * n + z * -0.4;
  EXPECT_NEAR(gru_step(w, x, h, mask)(0, 0), expected, 1e-15);

  mask << 0.0;  // masked rows keep their state
  EXPECT_EQ(gru_step(w, x, h, mask)(0, 0), -0.4);
}

TEST(GradientCheck, GeneratorLogProb) {
  Generator<double> g(tiny(), 41);
  auto f = [&] {
    double s = 0.0;
    for (double v : g.log_probs(g.forced(kXs, kYs))) s += v;
    return s;
  };
  auto grads = g.zero_grads();
  std::vector<std::vector<double>> ones;
  for (const auto& y : kYs) ones.emplace_back(y.size(), 1.0);
  g.accumulate_log_prob_gradient(g.forced(kXs, kYs), ones, grads);
  EXPECT_LE(oracle::relative_error(oracle::flatten(grads), oracle::finite_difference(g.params(), f, 1e-6)), 1e-4);
}

class DiscriminatorGradient : public ::testing::TestWithParam<StrategyKind> {};

TEST_P(DiscriminatorGradient, MatchesFiniteDifferences) {
  const auto cfg = StrategyConfig::defaults(GetParam());
  StepScorer<double> d(tiny(), ScorerRole::kDiscriminator, 42);
  auto f = [&] {
    Rng rng(5);
    return discriminator_loss(cfg, d, kXs, kYs, kFakes, rng).loss;
  };
  auto grads = d.zero_grads();
  Rng rng(5);
  discriminator_loss(cfg, d, kXs, kYs, kFakes, rng, &grads);
  EXPECT_LE(oracle::relative_error(oracle::flatten(grads), oracle::finite_difference(d.params(), f, 1e-6)), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Aggregations, DiscriminatorGradient,
                         ::testing::Values(StrategyKind::kSeqGan, StrategyKind::kRegs, StrategyKind::kMaskGan,
                                           StrategyKind::kStepGan));

TEST(GradientCheck, ValueRegression) {
  // update_value_network steps the optimizer, so the check runs through SGD:
  // the parameter change after one step is -lr * gradient.
  StepScorer<double> v(tiny(), ScorerRole::kValue, 43);
  const std::vector<StepScores> targets{{0.2, 0.9, 0.4}, {0.7, 0.1}, {0.5, 0.5, 0.3, 0.8}};
  auto mse = [&] {
    double s = 0.0, n = 0.0;
    const auto q = v.scores(kXs, kYs);
    for (std::size_t b = 0; b < q.size(); ++b) {
      for (std::size_t t = 0; t < q[b].size(); ++t) {
        s += (q[b][t] - targets[b][t]) * (q[b][t] - targets[b][t]);
        n += 1.0;
      }
    }
    return s / n;
  };
  const auto fd = oracle::finite_difference(v.params(), mse, 1e-6);
  const auto before = oracle::flatten(v.params());
  const double lr = 1e-3;
  Optimizer<double> opt({OptimizerKind::kSgd, lr, 0.0});
  const double reported = update_value_network(v, opt, kXs, kYs, targets);
  const auto after = oracle::flatten(v.params());
  std::vector<double> step(before.size());
  for (std::size_t i = 0; i < step.size(); ++i) step[i] = (before[i] - after[i]) / lr;
  EXPECT_LE(oracle::relative_error(step, fd), 1e-4);
  EXPECT_GT(reported, 0.0);
}

TEST(Normalization, EnumeratedOutputsSumToOne) {
  ModelConfig mc;
  mc.hidden_dim = 16;
  mc.embed_dim = 8;
  mc.init_scale = 0.7;
  const Generator<double> g(mc, 3);
  for (const TokenSequence& x : {TokenSequence{1, 8, 3}, TokenSequence{5}}) {
    double s = 0.0, from_log = 0.0;
    for (const auto& w : enumerate_outputs(g, x)) {
      s += w.prob;
      from_log += std::exp(sequence_log_prob(g, x, strip_eos(w.actions, vocab::kEos)));
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_NEAR(from_log, 1.0, 1e-9);
  }
}

TEST(Normalization, WithoutEosEveryOutputHasFullLength) {
  ModelConfig mc = tiny(-1);
  const Generator<double> g(mc, 4);
  const auto outs = enumerate_outputs(g, {0, 1}, 3);
  EXPECT_EQ(outs.size(), 64u);
  double s = 0.0;
  for (const auto& w : outs) {
    EXPECT_EQ(w.actions.size(), 3u);
    s += w.prob;
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Generator, ForcedPassAgreesWithStepping) {
  const Generator<double> g(tiny(), 8);
  const auto lp = g.log_probs(g.forced(kXs, kYs));
  const auto stepped = action_log_probs(g, kXs, kYs);
  for (std::size_t i = 0; i < lp.size(); ++i) EXPECT_NEAR(lp[i], stepped[i], 1e-12);
}

TEST(Scorer, DiscriminatorIsCausal) {
  const StepScorer<double> d(tiny(), ScorerRole::kDiscriminator, 9);
  const TokenSequence x{0, 1};
  const auto a = discriminate_steps(d, x, {1, 0, 1, 3});
  const auto b = discriminate_steps(d, x, {1, 0, 0, 0});
  EXPECT_EQ(a[0], b[0]);
  EXPECT_EQ(a[1], b[1]);
  EXPECT_NE(a[2], b[2]);  // Q_t sees y_t itself
}

TEST(Scorer, ValueSeesOnlyThePrefix) {
  const StepScorer<double> v(tiny(), ScorerRole::kValue, 10);
  const TokenSequence x{0, 1};
  const auto a = value_estimates(v, x, {1, 0, 1, 3});
  const auto b = value_estimates(v, x, {1, 0, 0, 0});
  EXPECT_EQ(a[0], b[0]);
  EXPECT_EQ(a[1], b[1]);
  EXPECT_EQ(a[2], b[2]);  // V_3 depends on y_1, y_2 only
  EXPECT_NE(a[3], b[3]);
}

TEST(Decoding, ArgmaxBreaksTiesTowardsLowestId) {
  const std::vector<double> p{0.1, 0.4, 0.4, 0.1};
  EXPECT_EQ(argmax_token(p), 1);
  const std::vector<double> flat(5, 0.2);
  EXPECT_EQ(argmax_token(flat), 0);
}

TEST(Decoding, ForcedPrefixesAreKept) {
  const Generator<double> g(tiny(), 11);
  Rng rng(1);
  const std::vector<TokenSequence> xs{{0}, {1, 1}, {0, 1}};
  const std::vector<TokenSequence> prefixes{{1, 0}, {}, {3}};
  const auto out = decode(g, xs, &prefixes, DecodeMode::kSample, &rng, 4);
  EXPECT_EQ(TokenSequence(out[0].begin(), out[0].begin() + 2), (TokenSequence{1, 0}));
  EXPECT_EQ(out[2], (TokenSequence{3}));  // a prefix ending in EOS is complete
  for (const auto& o : out) {
    EXPECT_LE(o.size(), 4u);
    EXPECT_TRUE(o.size() == 4u || o.back() == 3);
  }
}

TEST(Decoding, ArgmaxIsDeterministicAndStripsEos) {
  const Generator<double> g(tiny(), 12);
  const auto a = decode_argmax(g, {0, 1});
  EXPECT_EQ(a, decode_argmax(g, {0, 1}));
  EXPECT_TRUE(a.empty() || a.back() != 3);
}

TEST(Decoding, UniformHeadGivesUniformFirstTokens) {
  ModelConfig mc;
  mc.hidden_dim = 8;
  mc.embed_dim = 4;
  Generator<double> g(mc, 13);
  g.params().head_kernel.setZero();
  g.params().head_bias.setZero();
  Rng rng(77);
  constexpr int kDraws = 26000;
  std::vector<int> counts(vocab::kSize, 0);
  const std::vector<TokenSequence> xs(kDraws, TokenSequence{4, 2});
  for (const auto& a : decode(g, xs, nullptr, DecodeMode::kSample, &rng, 1)) ++counts[static_cast<std::size_t>(a.front())];
  // Pearson chi-square with 12 degrees of freedom; 32.9 is the 0.999 quantile.
  const double expected = static_cast<double>(kDraws) / vocab::kSize;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 32.9);
}

TEST(Decoding, RejectsBadArguments) {
  const Generator<double> g(tiny(), 14);
  EXPECT_THROW(decode(g, {{0}}, nullptr, DecodeMode::kSample, nullptr, 4), std::invalid_argument);
  EXPECT_THROW(decode(g, {{0}}, nullptr, DecodeMode::kArgmax, nullptr, 0), std::invalid_argument);
  EXPECT_THROW(sequence_log_prob(g, {0}, {0, 0, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(g.forced({{0}}, {{}}), std::invalid_argument);
  EXPECT_THROW(g.forced({{7}}, {{1}}), std::out_of_range);
}

TEST(Optimizer, SgdStepAndClipping) {
  Generator<double> g(tiny(), 15);
  const auto before = oracle::flatten(g.params());
  auto grads = g.zero_grads();
  grads.head_bias(0, 0) = 3.0;
  grads.head_bias(0, 1) = 4.0;  // norm 5
  Optimizer<double> opt({OptimizerKind::kSgd, 0.1, 1.0});
  EXPECT_DOUBLE_EQ(opt.step(g.params(), grads), 5.0);
  EXPECT_NEAR(g.params().head_bias(0, 0), before[before.size() - 4] - 0.1 * 0.6, 1e-15);
  EXPECT_NEAR(g.params().head_bias(0, 1), before[before.size() - 3] - 0.1 * 0.8, 1e-15);
}

TEST(Optimizer, AdaptiveKindsDescendOnAQuadratic) {
  for (auto kind : {OptimizerKind::kAdam, OptimizerKind::kRmsProp, OptimizerKind::kSgd}) {
    Generator<double> g(tiny(), 16);
    Optimizer<double> opt({kind, 1e-2, 5.0});
    auto loss = [&] { return g.params().head_bias.squaredNorm(); };
    const double start = loss();
    for (int i = 0; i < 50; ++i) {
      auto grads = g.zero_grads();
      grads.head_bias = 2.0 * g.params().head_bias;
      opt.step(g.params(), grads);
    }
    EXPECT_LT(loss(), start) << to_string(kind);
  }
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const auto dir = std::filesystem::temp_directory_path() / "stepgan_ckpt_test";
  std::filesystem::remove_all(dir);
  const Generator<float> g(ModelConfig{}, 21);
  const StepScorer<float> d(ModelConfig{}, ScorerRole::kDiscriminator, 22);
  Optimizer<float> opt({OptimizerKind::kAdam, 1e-3, 5.0});
  Generator<float> moved = g;
  auto grads = moved.zero_grads();
  grads.head_bias.setConstant(0.5f);
  opt.step(moved.params(), grads);

  CheckpointSection info;
  info.kind = "info";
  info.attrs["name"] = "run";
  info.tensors.push_back(text_blob("rng", std::string("line one\nline two \0 byte", 24)));
  write_checkpoint(dir / "a.ckpt", {model_section("generator", g), model_section("discriminator", d),
                                    optimizer_section("generator", opt), info});
  const auto sections = read_checkpoint(dir / "a.ckpt");
  write_checkpoint(dir / "b.ckpt", sections);
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));

  const auto g2 = generator_from<float>(find_section(sections, "model", "generator"));
  const auto d2 = scorer_from<float>(find_section(sections, "model", "discriminator"), ScorerRole::kDiscriminator);
  EXPECT_EQ(oracle::flatten(g.params()),
            oracle::flatten(g2.params()));
  EXPECT_EQ(oracle::flatten(d.params()),
            oracle::flatten(d2.params()));
  EXPECT_EQ(find_section(sections, "info", "run").tensors.front().bytes, info.tensors.front().bytes);

  Optimizer<float> restored({OptimizerKind::kAdam, 1e-3, 5.0});
  load_optimizer(find_section(sections, "optimizer", "generator"), restored);
  EXPECT_EQ(restored.steps(), 1);
  ASSERT_EQ(restored.first_moments().size(), opt.first_moments().size());
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    EXPECT_EQ(restored.first_moments()[i], opt.first_moments()[i]);
    EXPECT_EQ(restored.second_moments()[i], opt.second_moments()[i]);
  }
  EXPECT_THROW(generator_from<double>(find_section(sections, "model", "generator")), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RejectsForeignFiles) {
  const auto path = std::filesystem::temp_directory_path() / "stepgan_not_a_ckpt";
  std::ofstream(path) << "hello\n";
  EXPECT_THROW(read_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace stepgan
