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

#include <cstddef>
#include <cstdint>

#include "medmatch/corpus.hpp"

namespace medmatch {

struct SyntheticConfig {
  std::size_t entries = 50;
  std::size_t variants_per_entry = 6;
  std::uint64_t seed = 0;
};

/// Procedure-style corpus for tests and benchmarks. Each masterlist entry
/// combines a procedure, a body site and a modifier; its clinic variants
/// swap those concepts for abbreviations, synonyms or misspellings, shuffle
/// word order and add filler words. Pairs are grouped by entry in masterlist
/// order, `variants_per_entry` consecutive pairs each. Beyond the number of
/// distinct concept combinations, entries get a numeric code word.
Corpus make_synthetic_corpus(const SyntheticConfig& config);

}  // namespace medmatch
