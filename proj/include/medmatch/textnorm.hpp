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
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace medmatch {

enum class Stemmer { none, suffix_strip };

/// Normalization pipeline settings. Stopwords are kept in their normalized
/// form so membership tests see the same spelling as the token stream; add
/// them through add_stopwords() rather than inserting directly.
struct NormalizerConfig {
  bool strip_diacritics = true;
  bool lowercase = true;
  bool strip_punctuation = true;
  std::unordered_set<std::string> stopwords;
  Stemmer stemmer = Stemmer::none;
  std::vector<std::string> suffixes;  // longest first
  std::size_t min_stem_length = 3;
  std::string language_pack;

  void add_stopwords(const std::vector<std::string>& words);
};

using TokenStream = std::vector<std::string>;

/// Loads `<dir>/stopwords.txt` and `<dir>/suffixes.txt` (one entry per line,
/// '#' starts a comment) and enables the suffix stemmer.
NormalizerConfig load_language_pack(const std::filesystem::path& dir);

/// The Romanian pack shipped under data/lang/ro (or $MEDMATCH_LANG_DIR/ro).
NormalizerConfig romanian_pack();

/// NFKD, combining-mark removal, lowercasing, punctuation and symbols to
/// spaces, whitespace split, stopword removal, stemming.
TokenStream normalize(std::string_view text, const NormalizerConfig& config);

/// Diacritic stripping and lowercasing only.
std::string fold_text(std::string_view text, bool strip_diacritics = true, bool lowercase = true);

/// Repeated longest-match suffix stripping down to `min_stem_length`
/// codepoints; stops at a fixed point so stem(stem(w)) == stem(w).
std::string stem_suffix_strip(std::string_view token, const std::vector<std::string>& suffixes,
                              std::size_t min_stem_length);

/// Character n-grams (n_min..n_max codepoints) of each word of the folded
/// text, each word wrapped in '^' and '$'. Returned as a multiset in
/// emission order. Throws std::invalid_argument unless 1 <= n_min <= n_max.
std::vector<std::string> char_ngrams(std::string_view text, std::size_t n_min, std::size_t n_max);

bool valid_utf8(std::string_view bytes) noexcept;

std::string join_tokens(const TokenStream& tokens);

}  // namespace medmatch
