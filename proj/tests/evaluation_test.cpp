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

std::vector<CountingExample> sample_examples(std::uint64_t seed, int n, int max_input = 10) {
  Rng rng(seed);
  std::vector<CountingExample> out;
  for (int i = 0; i < n; ++i) out.push_back(sample_example(rng, max_input));
  return out;
}

std::vector<double> one_hot(Token t) {
  std::vector<double> p(vocab::kSize, 0.0);
  p[static_cast<std::size_t>(t)] = 1.0;
  return p;
}

// For the input "7": answers "0 7 0" with probability 0.8 and "5 7 0" with 0.2.
oracle::NextFn skewed_single_digit() {
  return [](const TokenSequence&, const TokenSequence& prefix) {
    switch (prefix.size()) {
      case 0: {
        std::vector<double> p(vocab::kSize, 0.0);
        p[0] = 0.8;
        p[5] = 0.2;
        return p;
      }
      case 1: return one_hot(7);
      case 2: return one_hot(0);
      default: return one_hot(vocab::kEos);
    }
  };
}

TEST(Oracle, IsPerfectUnderEveryMetric) {
  const auto ex = sample_examples(1, 300);
  const CountingOracle oracle;
  EXPECT_EQ(precision_argmax(oracle, ex), 100.0);
  EXPECT_NEAR(forward_kld(oracle, ex), 0.0, 1e-12);
  EXPECT_NEAR(inverse_kld(oracle, ex), 0.0, 1e-12);
  Rng rng(2);
  EXPECT_EQ(sample_precision_recall(oracle, ex, 20, rng).precision, 100.0);
}

TEST(Oracle, SampleRecallFollowsTheCouponCollector) {
  // Three distinct answers, three draws: E[distinct] / 3 = 1 - (2/3)^3.
  Rng rng(3);
  std::vector<CountingExample> ex;
  while (ex.size() < 3000) {
    auto e = sample_example(rng, 10);
    if (e.input.size() == 3) ex.push_back(e);
  }
  Rng draw(4);
  const auto q = sample_precision_recall(CountingOracle{}, ex, 3, draw);
  EXPECT_NEAR(q.recall, 100.0 * (1.0 - std::pow(2.0 / 3.0, 3)), 1.0);
}

TEST(Kld, HandComputedSkewedPolicy) {
  const oracle::TablePolicy policy(skewed_single_digit(), vocab::kSize, vocab::kEos);
  const std::vector<CountingExample> ex{{DigitSequence({7}), {0, 7, 0}}};
  EXPECT_NEAR(forward_kld(policy, ex), std::log(1.0 / 0.8), 1e-12);
  const double eps = 1e-9;
  EXPECT_NEAR(inverse_kld(policy, ex, eps), 0.8 * std::log(0.8) + 0.2 * std::log(0.2 / eps), 1e-12);
  EXPECT_EQ(precision_argmax(policy, ex), 100.0);
}

TEST(Kld, MatchesNaiveOraclesOnAGenerator) {
  ModelConfig mc;
  mc.embed_dim = 5;
  mc.hidden_dim = 7;
  mc.init_scale = 0.9;
  const Generator<double> g(mc, 5);
  const oracle::NextFn fn = [&g](const TokenSequence& x, const TokenSequence& prefix) {
    auto s = g.start({x});
    for (Token t : prefix) s = g.advance(s, {t});
    const auto p = g.next_probs(s);
    return std::vector<double>(p.data(), p.data() + p.cols());
  };
  const auto ex = sample_examples(6, 5);
  EXPECT_NEAR(forward_kld(g, ex), oracle::naive_fkld(fn, ex), 1e-9);
  EXPECT_NEAR(inverse_kld(g, ex, 1e-6), oracle::naive_ikld(fn, ex, 1e-6), 1e-9);
}

TEST(Kld, RejectsBadArguments) {
  const CountingOracle oracle;
  EXPECT_THROW(forward_kld(oracle, {}), std::invalid_argument);
  const auto ex = sample_examples(7, 2);
  EXPECT_THROW(inverse_kld(oracle, ex, 0.0), std::invalid_argument);
  EXPECT_THROW(inverse_kld(oracle, ex, 1e-9, 9), std::invalid_argument);
  EXPECT_GT(ikld_enumeration_size(9), kEnumerationCap);
}

TEST(Distinct, WorkedExample) {
  const std::vector<TokenSequence> corpus{{1, 2, 1}, {1, 2}};
  EXPECT_DOUBLE_EQ(distinct_ngrams(corpus, 1), 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(distinct_ngrams(corpus, 2), 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(distinct_ngrams(corpus, 3), 1.0 / 5.0);
  EXPECT_DOUBLE_EQ(distinct_ngrams(corpus, 3), oracle::naive_distinct(corpus, 3));
  EXPECT_THROW(distinct_ngrams({{}}, 1), std::invalid_argument);
  EXPECT_THROW(distinct_ngrams(corpus, 0), std::invalid_argument);
  EXPECT_DOUBLE_EQ(average_length(corpus), 2.5);
}

TEST(Precision, CountsValidResponses) {
  const std::vector<CountingExample> ex{{DigitSequence({1, 8, 3}), {0, 1, 2}}, {DigitSequence({4}), {0, 4, 0}}};
  EXPECT_DOUBLE_EQ(precision_of(ex, {{1, 8, 1}, {0, 4, 1}}), 50.0);
  EXPECT_DOUBLE_EQ(precision_of(ex, {{}, {0, 4, 0}}), 50.0);
  EXPECT_THROW(precision_of(ex, {{1, 8, 1}}), std::invalid_argument);
}

TEST(GeneralSet, TopTenthWithTies) {
  std::vector<TokenSequence> responses;
  auto add = [&](TokenSequence r, int n) {
    for (int i = 0; i < n; ++i) responses.push_back(r);
  };
  add({0, 1, 0}, 5);
  add({0, 2, 0}, 3);
  add({0, 3, 0}, 3);
  add({1, 1, 1}, 1);
  EXPECT_EQ(build_general_set(responses), (std::set<TokenSequence>{{0, 1, 0}}));
  add({0, 2, 0}, 2);
  EXPECT_EQ(build_general_set(responses), (std::set<TokenSequence>{{0, 1, 0}, {0, 2, 0}}));
  // Eleven distinct responses: the top two are kept.
  std::vector<TokenSequence> many;
  for (Token d = 0; d < 10; ++d) many.push_back({0, d, 0});
  many.push_back({1, 1, 1});
  many.push_back({1, 1, 1});
  many.push_back({0, 9, 0});
  EXPECT_EQ(build_general_set(many), (std::set<TokenSequence>{{1, 1, 1}, {0, 9, 0}}));

  const std::set<TokenSequence> general{{0, 1, 0}};
  EXPECT_EQ(count_general({{0, 1, 0}, {0, 1, 0}, {2, 2, 2}}, general, {{0, 1, 0}, {0, 5, 2}, {0, 1, 0}}), 1);
}

TEST(Variance, WorkedExample) {
  const auto p = step_variance({{0.0, 1.0}, {1.0, 1.0}});
  EXPECT_EQ(p.variance, (std::vector<double>{0.25, 0.0}));
  EXPECT_THROW(step_variance({{0.5}}), std::invalid_argument);
  EXPECT_THROW(step_variance({{0.5}, {0.5, 0.1}}), std::invalid_argument);
}

TEST(Evaluate, OracleReport) {
  const auto ex = sample_examples(8, 200);
  EvalOptions opt;
  opt.samples = 10;
  const auto r = evaluate(CountingOracle{}, ex, opt);
  EXPECT_EQ(r.prec, 100.0);
  EXPECT_EQ(r.samp_p, 100.0);
  EXPECT_NEAR(r.fkld_plus_ikld, 0.0, 1e-12);
  EXPECT_EQ(r.len_avg, 3.0);
  EXPECT_EQ(r.inputs, 200);
  EXPECT_EQ(r.dist_n.size(), 3u);
  EXPECT_EQ(evaluate(CountingOracle{}, ex, opt).samp_r, r.samp_r);
}

TEST(Csv, UpsertIsIdempotentAndSorted) {
  const auto dir = std::filesystem::temp_directory_path() / "stepgan_eval_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "eval.csv";
  EvalReport a;
  a.strategy = "seqgan";
  a.seed = 2;
  a.iteration = 500;
  a.dist_n = {{1, 0.5}, {2, 0.25}, {3, 0.125}};
  a.prec = 90.5;
  EvalReport b = a;
  b.iteration = 100;

  create_directories(dir);
  upsert_csv(path, a);
  upsert_csv(path, b);
  std::ifstream is(path);
  std::stringstream first;
  first << is.rdbuf();
  is.close();
  upsert_csv(path, a);
  std::ifstream again(path);
  std::stringstream second;
  second << again.rdbuf();
  EXPECT_EQ(first.str(), second.str());
  std::istringstream lines(second.str());
  std::string header, row1, row2, extra;
  std::getline(lines, header);
  std::getline(lines, row1);
  std::getline(lines, row2);
  EXPECT_EQ(header, csv_header());
  EXPECT_EQ(row1, csv_row(b));
  EXPECT_EQ(row2, csv_row(a));
  EXPECT_FALSE(std::getline(lines, extra));

  a.dist_n.erase(3);
  EXPECT_THROW(upsert_csv(path, a), std::runtime_error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace stepgan
