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

// Metrics for the counting task. Everything here is written against the
// SequencePolicy interface, so a trained generator and the exact reference
// distribution (CountingOracle) are evaluated by the same code.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepgan/counting_task.hpp"
#include "stepgan/decoding.hpp"
#include "stepgan/scorer.hpp"

namespace stepgan {

/// P_R(y|x) as a policy: at every step the next-token distribution is
/// uniform over the answers still consistent with the prefix, followed by
/// EOS. A prefix consistent with no answer continues with EOS.
class CountingOracle {
 public:
  struct State {
    std::vector<TokenSequence> xs;
    std::vector<TokenSequence> prefixes;
  };

  int vocab_size() const { return vocab::kSize; }
  Token eos_id() const { return vocab::kEos; }

  State start(const std::vector<TokenSequence>& xs) const {
    State s;
    s.xs = xs;
    s.prefixes.assign(xs.size(), {});
    return s;
  }

  Matrix<double> next_probs(const State& s) const {
    Matrix<double> p = Matrix<double>::Zero(static_cast<Index>(s.xs.size()), vocab::kSize);
    for (std::size_t r = 0; r < s.xs.size(); ++r) {
      const auto& x = s.xs[r];
      const auto& pre = s.prefixes[r];
      std::vector<Token> next;
      const int n = static_cast<int>(x.size());
      for (int k = 1; k <= n; ++k) {
        const TokenSequence a{k - 1, x[static_cast<std::size_t>(k - 1)], n - k, vocab::kEos};
        if (pre.size() < a.size() && std::equal(pre.begin(), pre.end(), a.begin())) next.push_back(a[pre.size()]);
      }
      const auto row = static_cast<Index>(r);
      if (next.empty()) {
        p(row, vocab::kEos) = 1.0;
      } else {
        for (Token t : next) p(row, t) += 1.0 / static_cast<double>(next.size());
      }
    }
    return p;
  }

  State select(const State& s, const std::vector<Index>& rows) const {
    State out;
    for (Index r : rows) {
      out.xs.push_back(s.xs[static_cast<std::size_t>(r)]);
      out.prefixes.push_back(s.prefixes[static_cast<std::size_t>(r)]);
    }
    return out;
  }

  State advance(const State& s, const std::vector<Token>& tokens) const {
    State out = s;
    for (std::size_t r = 0; r < tokens.size(); ++r) out.prefixes[r].push_back(tokens[r]);
    return out;
  }
};

static_assert(SequencePolicy<CountingOracle>);

namespace detail {

inline std::vector<TokenSequence> inputs_of(const std::vector<CountingExample>& examples, std::size_t begin,
                                            std::size_t end) {
  std::vector<TokenSequence> xs;
  xs.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) xs.push_back(examples[i].input.tokens());
  return xs;
}

inline void require_nonempty(const std::vector<CountingExample>& examples, const char* what) {
  if (examples.empty()) throw std::invalid_argument(std::string(what) + ": empty test set");
}

}  // namespace detail

/// Argmax responses (EOS stripped), one per example.
template <SequencePolicy P>
std::vector<TokenSequence> argmax_responses(const P& policy, const std::vector<CountingExample>& examples,
                                            int max_len = vocab::kDefaultMaxLen, std::size_t chunk = 512) {
  std::vector<TokenSequence> out;
  out.reserve(examples.size());
  for (std::size_t b = 0; b < examples.size(); b += chunk) {
    const auto xs = detail::inputs_of(examples, b, std::min(examples.size(), b + chunk));
    for (auto& a : decode(policy, xs, nullptr, DecodeMode::kArgmax, nullptr, max_len)) {
      out.push_back(strip_eos(std::move(a), policy.eos_id()));
    }
  }
  return out;
}

/// Percentage of responses that are valid answers for their inputs.
inline double precision_of(const std::vector<CountingExample>& examples, const std::vector<TokenSequence>& responses) {
  if (examples.size() != responses.size()) throw std::invalid_argument("precision: size mismatch");
  if (examples.empty()) throw std::invalid_argument("precision: empty test set");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) ok += is_valid(examples[i].input, responses[i]) ? 1 : 0;
  return 100.0 * static_cast<double>(ok) / static_cast<double>(examples.size());
}

template <SequencePolicy P>
double precision_argmax(const P& policy, const std::vector<CountingExample>& examples,
                        int max_len = vocab::kDefaultMaxLen) {
  detail::require_nonempty(examples, "precision_argmax");
  return precision_of(examples, argmax_responses(policy, examples, max_len));
}

struct SampleQuality {
  double precision = 0.0;  // pooled over all samples, percent
  double recall = 0.0;     // mean over inputs of distinct valid / N, percent
};

template <SequencePolicy P>
SampleQuality sample_precision_recall(const P& policy, const std::vector<CountingExample>& examples, int n_samples,
                                      Rng& rng, int max_len = vocab::kDefaultMaxLen, std::size_t chunk = 64) {
  detail::require_nonempty(examples, "sample_precision_recall");
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  std::size_t valid = 0;
  double recall_sum = 0.0;
  const auto S = static_cast<std::size_t>(n_samples);
  for (std::size_t b = 0; b < examples.size(); b += chunk) {
    const std::size_t e = std::min(examples.size(), b + chunk);
    std::vector<TokenSequence> xs;
    xs.reserve((e - b) * S);
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t k = 0; k < S; ++k) xs.push_back(examples[i].input.tokens());
    }
    const auto samples = decode(policy, xs, nullptr, DecodeMode::kSample, &rng, max_len);
    for (std::size_t i = b; i < e; ++i) {
      std::set<int> offsets;  // a valid answer is identified by y1
      for (std::size_t k = 0; k < S; ++k) {
        const auto y = strip_eos(samples[(i - b) * S + k], policy.eos_id());
        if (is_valid(examples[i].input, y)) {
          ++valid;
          offsets.insert(y[0]);
        }
      }
      recall_sum += static_cast<double>(offsets.size()) / static_cast<double>(examples[i].input.size());
    }
  }
  SampleQuality q;
  q.precision = 100.0 * static_cast<double>(valid) / static_cast<double>(examples.size() * S);
  q.recall = 100.0 * recall_sum / static_cast<double>(examples.size());
  return q;
}

/// Mean over inputs of sum_{y valid} P_R log(P_R / P_G), P_G floored at 1e-12.
template <SequencePolicy P>
double forward_kld(const P& policy, const std::vector<CountingExample>& examples, int max_len = vocab::kDefaultMaxLen,
                   std::size_t chunk = 256) {
  detail::require_nonempty(examples, "forward_kld");
  double total = 0.0;
  const double log_floor = std::log(kProbabilityFloor);
  for (std::size_t b = 0; b < examples.size(); b += chunk) {
    const std::size_t e = std::min(examples.size(), b + chunk);
    std::vector<TokenSequence> xs, actions;
    std::vector<std::size_t> owner;
    for (std::size_t i = b; i < e; ++i) {
      for (const auto& a : enumerate_answers(examples[i].input).answers) {
        xs.push_back(examples[i].input.tokens());
        actions.push_back(to_actions(a.tokens(), max_len, policy.eos_id()));
        owner.push_back(i);
      }
    }
    const auto lp = action_log_probs(policy, xs, actions);
    for (std::size_t j = 0; j < lp.size(); ++j) {
      const double pr = 1.0 / static_cast<double>(examples[owner[j]].input.size());
      total += pr * (std::log(pr) - std::max(lp[j], log_floor));
    }
  }
  return total / static_cast<double>(examples.size());
}

/// Number of sequences inverse_kld scores individually per input.
inline double ikld_enumeration_size(int max_len) {
  double n = 1.0;  // the residual bucket
  for (int d = 1; d < max_len; ++d) n += std::pow(static_cast<double>(vocab::kDigits), d);
  return n;
}

inline constexpr double kEnumerationCap = 1e6;
inline constexpr double kDefaultEpsilon = 1e-9;

/// Mean over inputs of sum_y P_G log(P_G / P~_R) with P~_R = 1/N on valid
/// answers and `epsilon` elsewhere. Digit strings of length 1..max_len-1
/// followed by EOS are scored one by one; all remaining mass (EOS first, a
/// non-digit token, or no EOS by max_len) forms a single residual bucket.
/// Terms below 1e-12 contribute nothing and such prefixes are not expanded.
template <SequencePolicy P>
double inverse_kld(const P& policy, const std::vector<CountingExample>& examples, double epsilon = kDefaultEpsilon,
                   int max_len = vocab::kDefaultMaxLen, std::size_t chunk = 32) {
  detail::require_nonempty(examples, "inverse_kld");
  if (!(epsilon > 0.0)) throw std::invalid_argument("inverse_kld: epsilon must be positive");
  if (max_len < 1) throw std::invalid_argument("inverse_kld: max_len must be >= 1");
  if (ikld_enumeration_size(max_len) > kEnumerationCap) throw std::invalid_argument("inverse_kld: output space too large");
  const Token eos = policy.eos_id();
  if (eos < 0) throw std::invalid_argument("inverse_kld: policy has no EOS");
  const double cut = kProbabilityFloor;

  auto term = [&](double p, double ref) { return p < cut ? 0.0 : p * (std::log(p) - std::log(ref)); };

  double total = 0.0;
  for (std::size_t b = 0; b < examples.size(); b += chunk) {
    const std::size_t e = std::min(examples.size(), b + chunk);
    const auto xs = detail::inputs_of(examples, b, e);
    std::vector<double> kl(e - b, 0.0), residual(e - b, 0.0);

    struct Node {
      std::size_t input;
      TokenSequence prefix;
      double prob;
    };
    std::vector<Node> frontier;
    for (std::size_t i = 0; i < xs.size(); ++i) frontier.push_back({i, {}, 1.0});
    auto state = policy.start(xs);
    for (int depth = 0; depth < max_len && !frontier.empty(); ++depth) {
      const Matrix<double> probs = policy.next_probs(state);
      std::vector<Node> next;
      std::vector<Index> rows;
      std::vector<Token> tokens;
      for (std::size_t r = 0; r < frontier.size(); ++r) {
        const Node& n = frontier[r];
        const auto row = static_cast<Index>(r);
        const double p_eos = n.prob * probs(row, eos);
        if (depth == 0) {
          residual[n.input] += p_eos;
        } else {
          const auto& x = examples[b + n.input].input;
          const double ref = is_valid(x, n.prefix) ? 1.0 / static_cast<double>(x.size()) : epsilon;
          kl[n.input] += term(p_eos, ref);
        }
        double other = 0.0;
        for (Token t = 0; t < policy.vocab_size(); ++t) {
          if (t == eos) continue;
          const double p = n.prob * probs(row, t);
          if (!vocab::is_digit(t) || depth + 1 == max_len) {
            other += p;
          } else if (p >= cut) {
            Node child{n.input, n.prefix, p};
            child.prefix.push_back(t);
            next.push_back(std::move(child));
            rows.push_back(row);
            tokens.push_back(t);
          }
        }
        residual[n.input] += other;
      }
      frontier = std::move(next);
      if (!frontier.empty()) state = policy.advance(policy.select(state, rows), tokens);
    }
    for (std::size_t i = 0; i < kl.size(); ++i) total += kl[i] + term(residual[i], epsilon);
  }
  return total / static_cast<double>(examples.size());
}

/// Distinct n-grams (within responses) over the total token count.
inline double distinct_ngrams(const std::vector<TokenSequence>& responses, int n) {
  if (n < 1) throw std::invalid_argument("distinct_ngrams: n must be >= 1");
  std::size_t total = 0;
  std::set<TokenSequence> seen;
  for (const auto& r : responses) {
    total += r.size();
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= r.size(); ++i) {
      seen.emplace(r.begin() + static_cast<std::ptrdiff_t>(i), r.begin() + static_cast<std::ptrdiff_t>(i) + n);
    }
  }
  if (total == 0) throw std::invalid_argument("distinct_ngrams: empty corpus");
  return static_cast<double>(seen.size()) / static_cast<double>(total);
}

inline double average_length(const std::vector<TokenSequence>& responses) {
  if (responses.empty()) throw std::invalid_argument("average_length: no responses");
  double s = 0.0;
  for (const auto& r : responses) s += static_cast<double>(r.size());
  return s / static_cast<double>(responses.size());
}

/// The most frequent responses: the top tenth (rounded up) of the distinct
/// responses by frequency, plus any response tied with the last one taken.
inline std::set<TokenSequence> build_general_set(const std::vector<TokenSequence>& mle_responses) {
  if (mle_responses.empty()) throw std::invalid_argument("build_general_set: no responses");
  std::map<TokenSequence, std::size_t> freq;
  for (const auto& r : mle_responses) ++freq[r];
  std::vector<std::size_t> counts;
  for (const auto& [r, c] : freq) counts.push_back(c);
  std::sort(counts.begin(), counts.end(), std::greater<>());
  const std::size_t keep = std::max<std::size_t>(1, (counts.size() + 9) / 10);
  const std::size_t threshold = counts[keep - 1];
  std::set<TokenSequence> out;
  for (const auto& [r, c] : freq) {
    if (c >= threshold) out.insert(r);
  }
  return out;
}

/// Responses that fall in the general set while their own ground truth does not.
inline long count_general(const std::vector<TokenSequence>& responses, const std::set<TokenSequence>& general,
                          const std::vector<TokenSequence>& ground_truths) {
  if (responses.size() != ground_truths.size()) throw std::invalid_argument("count_general: size mismatch");
  long n = 0;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (general.count(responses[i]) && !general.count(ground_truths[i])) ++n;
  }
  return n;
}

struct VarianceProfile {
  std::vector<double> variance;  // one entry per output step
};

/// Per-step population variance across snapshots of the same probe scores.
inline VarianceProfile step_variance(const std::vector<StepScores>& snapshots) {
  if (snapshots.size() < 2) throw std::invalid_argument("variance probe needs at least two checkpoints");
  const std::size_t M = snapshots.front().size();
  for (const auto& s : snapshots) {
    if (s.size() != M) throw std::invalid_argument("variance probe: inconsistent lengths");
  }
  VarianceProfile p;
  p.variance.assign(M, 0.0);
  const double K = static_cast<double>(snapshots.size());
  for (std::size_t t = 0; t < M; ++t) {
    double mean = 0.0;
    for (const auto& s : snapshots) mean += s[t];
    mean /= K;
    double ss = 0.0;
    for (const auto& s : snapshots) ss += (s[t] - mean) * (s[t] - mean);
    p.variance[t] = ss / K;
  }
  return p;
}

template <typename T>
VarianceProfile q_variance_probe(const std::vector<const StepScorer<T>*>& checkpoints, const TokenSequence& x,
                                 const TokenSequence& y) {
  std::vector<StepScores> snaps;
  for (const auto* d : checkpoints) snaps.push_back(discriminate_steps(*d, x, y));
  return step_variance(snaps);
}

/// Two-column plot data: 1-based step index, variance.
inline void write_plot_data(const std::filesystem::path& path, const std::vector<std::pair<double, double>>& rows,
                            const std::string& header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "# " << header << '\n';
  char buf[96];
  for (const auto& [a, b] : rows) {
    std::snprintf(buf, sizeof buf, "%.17g\t%.17g\n", a, b);
    os << buf;
  }
}

// -- reports -----------------------------------------------------------------

struct EvalOptions {
  int samples = 100;
  double epsilon = kDefaultEpsilon;
  int max_len = vocab::kDefaultMaxLen;
  std::uint64_t seed = 0;  // sampling stream for SampP / SampR
  std::vector<int> dist_orders{1, 2, 3};
};

struct EvalReport {
  std::string strategy;
  long seed = 0;
  long iteration = 0;
  std::string model_id;
  long inputs = 0;
  int samples = 0;
  double prec = 0.0;
  double samp_p = 0.0;
  double samp_r = 0.0;
  double fkld = 0.0;
  double ikld = 0.0;
  double fkld_plus_ikld = 0.0;
  double epsilon = kDefaultEpsilon;
  std::map<int, double> dist_n;
  double len_avg = 0.0;
  long general_count = 0;
};

/// Computes every metric for one model snapshot. `general` is the general
/// response set (usually built from the MLE model's argmax outputs); when
/// null the set is built from this model's own responses.
template <SequencePolicy P>
EvalReport evaluate(const P& policy, const std::vector<CountingExample>& examples, const EvalOptions& opt,
                    const std::set<TokenSequence>* general = nullptr) {
  detail::require_nonempty(examples, "evaluate");
  EvalReport r;
  r.inputs = static_cast<long>(examples.size());
  r.samples = opt.samples;
  r.epsilon = opt.epsilon;
  const auto responses = argmax_responses(policy, examples, opt.max_len);
  r.prec = precision_of(examples, responses);
  Rng rng(opt.seed);
  const auto sq = sample_precision_recall(policy, examples, opt.samples, rng, opt.max_len);
  r.samp_p = sq.precision;
  r.samp_r = sq.recall;
  r.fkld = forward_kld(policy, examples, opt.max_len);
  r.ikld = inverse_kld(policy, examples, opt.epsilon, opt.max_len);
  r.fkld_plus_ikld = r.fkld + r.ikld;
  bool any_tokens = false;
  for (const auto& y : responses) any_tokens = any_tokens || !y.empty();
  for (int n : opt.dist_orders) r.dist_n[n] = any_tokens ? distinct_ngrams(responses, n) : 0.0;
  r.len_avg = average_length(responses);
  std::vector<TokenSequence> truths;
  truths.reserve(examples.size());
  for (const auto& ex : examples) truths.push_back(ex.answer.tokens());
  const auto own = general ? std::set<TokenSequence>{} : build_general_set(responses);
  r.general_count = count_general(responses, general ? *general : own, truths);
  return r;
}

inline std::string csv_header(const std::vector<int>& dist_orders = {1, 2, 3}) {
  std::string h = "strategy,seed,iteration,model_id,inputs,samples,prec,samp_p,samp_r,fkld,ikld,fkld_plus_ikld,epsilon";
  for (int n : dist_orders) h += ",dist_" + std::to_string(n);
  h += ",len_avg,general_count";
  return h;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_row(const EvalReport& r) {
  std::ostringstream os;
  os << r.strategy << ',' << r.seed << ',' << r.iteration << ',' << r.model_id << ',' << r.inputs << ',' << r.samples
     << ',' << format_number(r.prec) << ',' << format_number(r.samp_p) << ',' << format_number(r.samp_r) << ','
     << format_number(r.fkld) << ',' << format_number(r.ikld) << ',' << format_number(r.fkld_plus_ikld) << ','
     << format_number(r.epsilon);
  for (const auto& [n, v] : r.dist_n) os << ',' << format_number(v);
  os << ',' << format_number(r.len_avg) << ',' << r.general_count;
  return os.str();
}

/// Inserts or replaces the row keyed by (strategy, seed, iteration), keeping
/// the table sorted by that key so repeated evaluation leaves it unchanged.
inline void upsert_csv(const std::filesystem::path& path, const EvalReport& r) {
  std::vector<std::string> rows;
  const std::string header = csv_header([&] {
    std::vector<int> orders;
    for (const auto& [n, v] : r.dist_n) orders.push_back(n);
    return orders;
  }());
  if (std::filesystem::exists(path)) {
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    if (line != header) throw std::runtime_error("eval table " + path.string() + " has a different column layout");
    while (std::getline(is, line)) {
      if (!line.empty()) rows.push_back(line);
    }
  }
  auto key = [](const std::string& row) {
    std::istringstream ls(row);
    std::string strategy, seed, iteration;
    std::getline(ls, strategy, ',');
    std::getline(ls, seed, ',');
    std::getline(ls, iteration, ',');
    return std::make_tuple(strategy, std::stol(seed), std::stol(iteration));
  };
  const std::string mine = csv_row(r);
  const auto my_key = key(mine);
  std::erase_if(rows, [&](const std::string& row) { return key(row) == my_key; });
  rows.push_back(mine);
  std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << header << '\n';
  for (const auto& row : rows) os << row << '\n';
}

}  // namespace stepgan
