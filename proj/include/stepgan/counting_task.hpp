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

#pragma once

// Synthetic counting task. For an input x = <x_1..x_N> the valid answers are
// exactly {<k-1, x_k, N-k> : k = 1..N}, and the reference conditional puts
// mass 1/N on each of them.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepgan/random.hpp"
#include "stepgan/vocabulary.hpp"

namespace stepgan {

inline constexpr int kDefaultMaxInputLength = 10;

/// Non-empty sequence of digits, at most `max_length` long.
class DigitSequence {
 public:
  DigitSequence() = default;
  explicit DigitSequence(TokenSequence tokens, int max_length = kDefaultMaxInputLength)
      : tokens_(std::move(tokens)) {
    if (tokens_.empty()) throw std::invalid_argument("digit sequence must be non-empty");
    if (static_cast<int>(tokens_.size()) > max_length) {
      throw std::invalid_argument("digit sequence longer than " + std::to_string(max_length));
    }
    for (Token t : tokens_) {
      if (!vocab::is_digit(t)) {
        throw std::invalid_argument("token " + std::to_string(t) + " is not a digit");
      }
    }
  }

  const TokenSequence& tokens() const { return tokens_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  Token operator[](int i) const { return tokens_[static_cast<std::size_t>(i)]; }
  bool operator==(const DigitSequence&) const = default;

 private:
  TokenSequence tokens_;
};

/// One answer <y1, y2, y3> = <k-1, x_k, N-k>.
struct Answer {
  int offset = 0;     // y1
  Token digit = 0;    // y2
  int remainder = 0;  // y3

  TokenSequence tokens() const { return {offset, digit, remainder}; }
  auto operator<=>(const Answer&) const = default;
};

struct AnswerSet {
  DigitSequence source;
  std::vector<Answer> answers;  // ordered by k

  std::size_t size() const { return answers.size(); }
};

inline AnswerSet enumerate_answers(const DigitSequence& x) {
  if (x.size() == 0) throw std::invalid_argument("enumerate_answers: empty input");
  AnswerSet set{x, {}};
  const int n = x.size();
  set.answers.reserve(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) set.answers.push_back({k - 1, x[k - 1], n - k});
  return set;
}

/// True iff `y` is one of the answers for `x`. Checked arithmetically rather
/// than by enumeration.
inline bool is_valid(const DigitSequence& x, const TokenSequence& y) {
  if (y.size() != 3) return false;
  const int n = x.size();
  const int offset = y[0];
  if (offset < 0 || offset >= n) return false;
  return y[1] == x[offset] && y[2] == n - 1 - offset;
}

/// Reference conditional P_R(y|x): 1/N on valid answers, 0 elsewhere.
inline double true_conditional(const DigitSequence& x, const TokenSequence& y) {
  return is_valid(x, y) ? 1.0 / x.size() : 0.0;
}

/// Same as true_conditional but with `floor` in place of zero.
inline double smoothed_conditional(const DigitSequence& x, const TokenSequence& y, double floor) {
  return is_valid(x, y) ? 1.0 / x.size() : floor;
}

struct CountingExample {
  DigitSequence input;
  Answer answer;
};

struct DatasetSizes {
  std::size_t train = 100000;
  std::size_t valid = 10000;
  std::size_t test = 10000;
};

struct CountingDataset {
  std::vector<CountingExample> train;
  std::vector<CountingExample> valid;
  std::vector<CountingExample> test;
  std::uint64_t seed = 0;
  int max_input_length = kDefaultMaxInputLength;
};

/// Input length ~ U{1..max_length}, digits ~ U{0..9}, k ~ U{1..N}.
inline CountingExample sample_example(Rng& rng, int max_length) {
  const int n = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(max_length)));
  TokenSequence digits(static_cast<std::size_t>(n));
  for (auto& d : digits) d = static_cast<Token>(uniform_index(rng, vocab::kDigits));
  DigitSequence x(std::move(digits), max_length);
  const int k = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
  return {x, Answer{k - 1, x[k - 1], n - k}};
}

inline CountingDataset generate_dataset(std::uint64_t seed, DatasetSizes sizes,
                                        int max_length = kDefaultMaxInputLength) {
  if (sizes.train == 0 || sizes.valid == 0 || sizes.test == 0) {
    throw std::invalid_argument("dataset split sizes must be positive");
  }
  if (max_length < 1) throw std::invalid_argument("max input length must be >= 1");
  // The vocabulary has ten digit tokens, so y1 and y3 (< N) must fit in one.
  if (max_length > vocab::kDigits) {
    throw std::invalid_argument("max input length above 10 cannot be encoded");
  }
  CountingDataset ds;
  ds.seed = seed;
  ds.max_input_length = max_length;
  Rng rng(seed);
  auto fill = [&](std::vector<CountingExample>& split, std::size_t count) {
    split.reserve(count);
    for (std::size_t i = 0; i < count; ++i) split.push_back(sample_example(rng, max_length));
  };
  fill(ds.train, sizes.train);
  fill(ds.valid, sizes.valid);
  fill(ds.test, sizes.test);
  return ds;
}

// ---------------------------------------------------------------------------
// Text format: one example per line, "<x digits>\t<y digits>", digits
// separated by single spaces.

inline TokenSequence parse_tokens(const std::string& field) {
  TokenSequence out;
  std::istringstream is(field);
  std::string item;
  while (is >> item) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad token '" + item + "'");
    }
    if (used != item.size()) throw std::invalid_argument("bad token '" + item + "'");
    out.push_back(v);
  }
  return out;
}

inline std::string format_example(const CountingExample& ex) {
  return to_string(ex.input.tokens()) + '\t' + to_string(ex.answer.tokens());
}

inline CountingExample parse_example(const std::string& line, int max_length = kDefaultMaxInputLength) {
  const auto tab = line.find('\t');
  if (tab == std::string::npos) throw std::invalid_argument("missing tab in example line");
  DigitSequence x(parse_tokens(line.substr(0, tab)), max_length);
  const TokenSequence y = parse_tokens(line.substr(tab + 1));
  if (!is_valid(x, y)) throw std::invalid_argument("answer does not satisfy the counting rule: " + line);
  return {x, Answer{y[0], y[1], y[2]}};
}

inline void write_examples(const std::filesystem::path& path, const std::vector<CountingExample>& examples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const auto& ex : examples) os << format_example(ex) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline std::vector<CountingExample> read_examples(const std::filesystem::path& path,
                                                  int max_length = kDefaultMaxInputLength) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::vector<CountingExample> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(parse_example(line, max_length));
  }
  return out;
}

/// Writes train.txt, valid.txt, test.txt and manifest.txt under `dir`.
inline void write_dataset(const std::filesystem::path& dir, const CountingDataset& ds) {
  std::filesystem::create_directories(dir);
  write_examples(dir / "train.txt", ds.train);
  write_examples(dir / "valid.txt", ds.valid);
  write_examples(dir / "test.txt", ds.test);
  std::ofstream m(dir / "manifest.txt", std::ios::binary);
  if (!m) throw std::runtime_error("cannot write manifest in " + dir.string());
  m << "format=counting-v1\n"
    << "seed=" << ds.seed << '\n'
    << "train_size=" << ds.train.size() << '\n'
    << "valid_size=" << ds.valid.size() << '\n'
    << "test_size=" << ds.test.size() << '\n'
    << "nmax=" << ds.max_input_length << '\n'
    << "length_distribution=uniform\n";
}

/// Mean |AnswerSet| over the inputs, i.e. the mean input length.
inline double mean_answer_count(const std::vector<CountingExample>& examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : examples) total += ex.input.size();
  return total / static_cast<double>(examples.size());
}

}  // namespace stepgan
