// Copyright 2026 The MedMatch Authors.
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
#include <string_view>

namespace medmatch {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// 64-bit FNV-1a over `bytes`, continuing from `state`.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffsetBasis) noexcept {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

/// FNV-1a seeded by the 8 little-endian bytes of `salt`, then `bytes`.
constexpr std::uint64_t salted_fnv1a64(std::uint64_t salt, std::string_view bytes) noexcept {
  std::uint64_t state = kFnvOffsetBasis;
  for (int i = 0; i < 8; ++i) {
    state ^= (salt >> (8 * i)) & 0xFFu;
    state *= kFnvPrime;
  }
  return fnv1a64(bytes, state);
}

}  // namespace medmatch
