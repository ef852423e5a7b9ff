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

#include "medmatch/textnorm.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "medmatch/error.hpp"

namespace medmatch {

namespace {

bool is_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c < 0x80; });
}

bool is_separator(UChar32 c, bool strip_punctuation) {
  if (u_isUWhiteSpace(c) || u_charType(c) == U_CONTROL_CHAR) return true;
  if (!strip_punctuation) return false;
  const auto mask = U_GET_GC_MASK(c);
  return (mask & (U_GC_P_MASK | U_GC_S_MASK)) != 0;
}

void append_utf8(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool error = false;
  U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, c, error);
  if (!error) out.append(buf, static_cast<std::size_t>(len));
}

// Decodes valid UTF-8 into codepoints.
std::vector<UChar32> decode(std::string_view s) {
  std::vector<UChar32> cps;
  cps.reserve(s.size());
  int32_t i = 0;
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  const auto n = static_cast<int32_t>(s.size());
  while (i < n) {
    UChar32 c;
    U8_NEXT(bytes, i, n, c);
    if (c >= 0) cps.push_back(c);
  }
  return cps;
}

// Splits folded text into words on whitespace (and punctuation when asked).
std::vector<std::string> split_words(std::string_view folded, bool strip_punctuation) {
  std::vector<std::string> words;
  std::string current;
  for (UChar32 c : decode(folded)) {
    if (is_separator(c, strip_punctuation)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      append_utf8(current, c);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<std::string> read_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open language pack file " + path.string());
  std::vector<std::string> items;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    line.erase(0, line.find_first_not_of(" \t"));
    if (!line.empty()) items.push_back(line);
  }
  return items;
}

std::size_t codepoint_count(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](unsigned char c) { return (c & 0xC0) != 0x80; }));
}

}  // namespace

bool valid_utf8(std::string_view bytes) noexcept {
  const auto* p = reinterpret_cast<const uint8_t*>(bytes.data());
  const auto n = static_cast<int32_t>(bytes.size());
  int32_t i = 0;
  while (i < n) {
    UChar32 c;
    U8_NEXT(p, i, n, c);
    if (c < 0) return false;
  }
  return true;
}

std::string fold_text(std::string_view text, bool strip_diacritics, bool lowercase) {
  if (is_ascii(text)) {
    std::string out(text);
    if (lowercase) {
      std::transform(out.begin(), out.end(), out.begin(),
                     [](unsigned char c) { return static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c); });
    }
    return out;
  }

  icu::UnicodeString ustr = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (strip_diacritics) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfkd = icu::Normalizer2::getNFKDInstance(status);
    if (U_FAILURE(status)) throw Error("ICU NFKD normalizer unavailable");
    ustr = nfkd->normalize(ustr, status);
    if (U_FAILURE(status)) throw Error("NFKD normalization failed");
  }
  std::string out;
  out.reserve(text.size());
  for (int32_t i = 0; i < ustr.length();) {
    const UChar32 c = ustr.char32At(i);
    i += U16_LENGTH(c);
    if (strip_diacritics && (U_GET_GC_MASK(c) & U_GC_M_MASK)) continue;
    append_utf8(out, lowercase ? u_tolower(c) : c);
  }
  return out;
}

void NormalizerConfig::add_stopwords(const std::vector<std::string>& words) {
  for (const auto& w : words) {
    for (auto& part : split_words(fold_text(w, strip_diacritics, lowercase), strip_punctuation)) {
      stopwords.insert(std::move(part));
    }
  }
}

NormalizerConfig load_language_pack(const std::filesystem::path& dir) {
  NormalizerConfig config;
  config.language_pack = dir.filename().string();
  config.add_stopwords(read_list(dir / "stopwords.txt"));
  for (const auto& s : read_list(dir / "suffixes.txt")) config.suffixes.push_back(fold_text(s));
  std::stable_sort(config.suffixes.begin(), config.suffixes.end(),
                   [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
  config.stemmer = Stemmer::suffix_strip;
  return config;
}

NormalizerConfig romanian_pack() {
  std::filesystem::path root = MEDMATCH_DEFAULT_LANG_DIR;
  if (const char* env = std::getenv("MEDMATCH_LANG_DIR"); env && *env) root = env;
  return load_language_pack(root / "ro");
}

std::string stem_suffix_strip(std::string_view token, const std::vector<std::string>& suffixes,
                              std::size_t min_stem_length) {
  std::string word(token);
  for (bool changed = true; changed;) {
    changed = false;
    const std::size_t len = codepoint_count(word);
    for (const auto& suffix : suffixes) {  // longest first
      if (suffix.empty() || suffix.size() > word.size()) continue;
      if (word.compare(word.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
      if (len - codepoint_count(suffix) < min_stem_length) continue;
      word.resize(word.size() - suffix.size());
      changed = true;
      break;
    }
  }
  return word;
}

TokenStream normalize(std::string_view text, const NormalizerConfig& config) {
  TokenStream tokens;
  for (auto& word : split_words(fold_text(text, config.strip_diacritics, config.lowercase),
                                config.strip_punctuation)) {
    if (config.stopwords.contains(word)) continue;
    if (config.stemmer == Stemmer::suffix_strip) {
      word = stem_suffix_strip(word, config.suffixes, config.min_stem_length);
      // A stem can coincide with a stopword; dropping it keeps normalize idempotent.
      if (config.stopwords.contains(word)) continue;
    }
    tokens.push_back(std::move(word));
  }
  return tokens;
}

std::vector<std::string> char_ngrams(std::string_view text, std::size_t n_min, std::size_t n_max) {
  if (n_min < 1 || n_min > n_max) throw std::invalid_argument("char_ngrams: need 1 <= n_min <= n_max");
  std::vector<std::string> grams;
  for (const auto& word : split_words(fold_text(text), /*strip_punctuation=*/true)) {
    std::vector<UChar32> cps = decode(word);
    cps.insert(cps.begin(), U'^');
    cps.push_back(U'$');
    for (std::size_t n = n_min; n <= n_max; ++n) {
      if (n > cps.size()) break;
      for (std::size_t i = 0; i + n <= cps.size(); ++i) {
        std::string gram;
        for (std::size_t j = i; j < i + n; ++j) append_utf8(gram, cps[j]);
        grams.push_back(std::move(gram));
      }
    }
  }
  return grams;
}

std::string join_tokens(const TokenStream& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace medmatch
