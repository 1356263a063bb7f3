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
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stepgan/counting_task.hpp"

namespace stepgan {
namespace {

std::set<TokenSequence> answer_tokens(const DigitSequence& x) {
  std::set<TokenSequence> out;
  for (const auto& a : enumerate_answers(x).answers) out.insert(a.tokens());
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TEST(EnumerateAnswers, WorkedExample) {
  EXPECT_EQ(answer_tokens(DigitSequence({1, 8, 3})),
            (std::set<TokenSequence>{{0, 1, 2}, {1, 8, 1}, {2, 3, 0}}));
}

TEST(EnumerateAnswers, SingleDigitHasOneAnswer) {
  EXPECT_EQ(answer_tokens(DigitSequence({7})), (std::set<TokenSequence>{{0, 7, 0}}));
}

TEST(EnumerateAnswers, RepeatedDigitsStillGiveDistinctAnswers) {
  const auto set = enumerate_answers(DigitSequence({2, 2}));
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(answer_tokens(DigitSequence({2, 2})), (std::set<TokenSequence>{{0, 2, 1}, {1, 2, 0}}));
}

TEST(EnumerateAnswers, MatchesExhaustiveScan) {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto ex = sample_example(rng, 10);
    const auto got = answer_tokens(ex.input);
    EXPECT_EQ(got.size(), static_cast<std::size_t>(ex.input.size()));
    EXPECT_EQ(got, oracle::scan_answers(ex.input.tokens()));
  }
}

TEST(DigitSequence, RejectsInvalidInputs) {
  EXPECT_THROW(DigitSequence(TokenSequence{}), std::invalid_argument);
  EXPECT_THROW(DigitSequence({1, 10}), std::invalid_argument);
  EXPECT_THROW(DigitSequence({-1}), std::invalid_argument);
  EXPECT_THROW(DigitSequence(TokenSequence(11, 1)), std::invalid_argument);
}

TEST(IsValid, Examples) {
  const DigitSequence x({1, 8, 3});
  EXPECT_TRUE(is_valid(x, {1, 8, 1}));
  EXPECT_FALSE(is_valid(x, {0, 1, 2, 0}));
  EXPECT_FALSE(is_valid(x, {9, 9, 9}));
  EXPECT_FALSE(is_valid(x, {}));
  EXPECT_FALSE(is_valid(x, {0, 1, 1}));
  EXPECT_FALSE(is_valid(x, {-1, 1, 3}));
}

TEST(TrueConditional, ValuesAndNormalization) {
  const DigitSequence x({1, 8, 3});
  EXPECT_DOUBLE_EQ(true_conditional(x, {0, 1, 2}), 1.0 / 3.0);
  EXPECT_EQ(true_conditional(x, {5, 5, 5}), 0.0);
  EXPECT_EQ(true_conditional(DigitSequence({7}), {0, 7, 0}), 1.0);
  EXPECT_EQ(smoothed_conditional(x, {5, 5, 5}, 1e-9), 1e-9);

  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto ex = sample_example(rng, 10);
    double total = 0.0;
    for (const auto& a : enumerate_answers(ex.input).answers) total += true_conditional(ex.input, a.tokens());
    EXPECT_NEAR(total, 1.0, 1e-15);
  }
}

TEST(GenerateDataset, TinySizesAreValid) {
  const auto ds = generate_dataset(0, {1, 1, 1}, 10);
  ASSERT_EQ(ds.train.size(), 1u);
  ASSERT_EQ(ds.valid.size(), 1u);
  ASSERT_EQ(ds.test.size(), 1u);
  for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
    EXPECT_TRUE(is_valid(split->front().input, split->front().answer.tokens()));
  }
}

TEST(GenerateDataset, EveryExampleIsValidAndLengthsCoverRange) {
  const auto ds = generate_dataset(5, {20000, 10, 10}, 10);
  std::set<int> lengths;
  for (const auto& ex : ds.train) {
    ASSERT_TRUE(is_valid(ex.input, ex.answer.tokens()));
    lengths.insert(ex.input.size());
  }
  EXPECT_EQ(lengths.size(), 10u);
  // Uniform lengths on 1..10 average 5.5 answers per input.
  EXPECT_NEAR(mean_answer_count(ds.train), 5.5, 0.1);
}

TEST(GenerateDataset, RejectsBadArguments) {
  EXPECT_THROW(generate_dataset(0, {0, 1, 1}, 10), std::invalid_argument);
  EXPECT_THROW(generate_dataset(0, {1, 1, 1}, 0), std::invalid_argument);
  EXPECT_THROW(generate_dataset(0, {1, 1, 1}, 11), std::invalid_argument);
}

TEST(GenerateDataset, FilesAreByteIdenticalAcrossRuns) {
  const auto tmp = std::filesystem::temp_directory_path() / "stepgan_dataset_test";
  std::filesystem::remove_all(tmp);
  write_dataset(tmp / "a", generate_dataset(42, {300, 30, 30}, 10));
  write_dataset(tmp / "b", generate_dataset(42, {300, 30, 30}, 10));
  for (const char* f : {"train.txt", "valid.txt", "test.txt", "manifest.txt"}) {
    EXPECT_EQ(slurp(tmp / "a" / f), slurp(tmp / "b" / f)) << f;
  }
  EXPECT_NE(slurp(tmp / "a" / "manifest.txt").find("seed=42"), std::string::npos);
  const auto back = read_examples(tmp / "a" / "valid.txt");
  const auto orig = generate_dataset(42, {300, 30, 30}, 10).valid;
  ASSERT_EQ(back.size(), orig.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].input, orig[i].input);
    EXPECT_EQ(back[i].answer, orig[i].answer);
  }
  std::filesystem::remove_all(tmp);
}

TEST(ExampleFormat, RoundTripAndValidation) {
  const CountingExample ex{DigitSequence({1, 8, 3}), {1, 8, 1}};
  const std::string line = format_example(ex);
  EXPECT_EQ(line, "1 8 3\t1 8 1");
  const auto back = parse_example(line);
  EXPECT_EQ(back.input, ex.input);
  EXPECT_EQ(back.answer, ex.answer);
  EXPECT_THROW(parse_example("1 8 3\t9 9 9"), std::invalid_argument);
  EXPECT_THROW(parse_example("1 8 3"), std::invalid_argument);
}

}  // namespace
}  // namespace stepgan
