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

#include <cstdint>
#include <string>
#include <vector>

namespace stepgan {

using Token = std::int32_t;
using TokenSequence = std::vector<Token>;

/// Token ids of the counting vocabulary. Digits map to themselves; the
/// control tokens follow. These ids are part of the checkpoint contract and
/// must not change.
namespace vocab {
inline constexpr Token kBos = 10;
inline constexpr Token kEos = 11;
inline constexpr Token kPad = 12;
inline constexpr int kSize = 13;
inline constexpr int kDigits = 10;
inline constexpr int kDefaultMaxLen = 4;  // three answer digits + EOS

inline constexpr bool is_digit(Token t) { return t >= 0 && t < kDigits; }
}  // namespace vocab

/// Whitespace-joined rendering, e.g. "1 8 3".
inline std::string to_string(const TokenSequence& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out.push_back(' ');
    out += std::to_string(seq[i]);
  }
  return out;
}

}  // namespace stepgan
