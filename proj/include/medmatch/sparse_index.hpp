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
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "medmatch/ranked_list.hpp"
#include "medmatch/textnorm.hpp"

namespace medmatch {

using TermId = std::uint32_t;

/// Term-id → weight, sorted by term id, no zero weights.
struct SparseVector {
  std::vector<std::pair<TermId, double>> entries;

  bool empty() const noexcept { return entries.empty(); }
  double weight(TermId term) const;
};

double dot(const SparseVector& a, const SparseVector& b);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Okapi BM25 realized as sparse vectors whose inner product is the score:
/// documents carry the saturated, length-normalized tf part and queries
/// carry tf * IDF, with IDF(t) = ln((N - df + 0.5) / (df + 0.5) + 1).
///
/// Immutable once built except for append(), which the service uses for
/// reviewer feedback: appended documents update N and df (so query-side IDF
/// stays exact) but are weighted with the average length frozen at build
/// time. A rebuild clears that staleness.
class Bm25Index {
 public:
  Bm25Index() = default;

  static Bm25Index build(const std::vector<std::pair<DocRef, TokenStream>>& docs, Bm25Params params = {});

  void append(DocRef ref, const TokenStream& tokens);

  std::size_t size() const noexcept { return refs_.size(); }
  bool empty() const noexcept { return refs_.empty(); }
  const Bm25Params& params() const noexcept { return params_; }
  double avgdl() const noexcept { return avgdl_; }
  std::size_t vocabulary_size() const noexcept { return terms_.size(); }

  std::optional<TermId> term_id(const std::string& term) const;
  const std::string& term(TermId id) const { return terms_.at(id); }
  std::size_t df(TermId id) const { return df_.at(id); }
  double idf(TermId id) const;

  const DocRef& doc_ref(std::size_t doc) const { return refs_.at(doc); }
  const SparseVector& doc_vector(std::size_t doc) const { return vectors_.at(doc); }
  std::size_t doc_length(std::size_t doc) const { return lengths_.at(doc); }

  /// Doc-side weight of a term occurring `tf` times in a document of `length` tokens.
  double doc_weight(std::size_t tf, std::size_t length) const;

  /// Candidates with positive inner product, best first (ties by tie_break_less).
  RankedList search(const SparseVector& query, std::size_t limit) const;

  /// "MMSPARSE1\n" followed by one JSON document.
  void save(std::ostream& out) const;
  static Bm25Index load(std::istream& in);

 private:
  struct Posting {
    std::uint32_t doc;
    double weight;
  };

  TermId intern(const std::string& term);
  void add_vector(DocRef ref, const TokenStream& tokens);

  Bm25Params params_;
  double avgdl_ = 0.0;
  std::unordered_map<std::string, TermId> vocabulary_;
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::vector<DocRef> refs_;
  std::vector<SparseVector> vectors_;
  std::vector<std::size_t> lengths_;
  std::vector<std::vector<Posting>> postings_;
};

/// Query vector; terms unknown to the index are dropped.
SparseVector embed_query_sparse(const TokenStream& tokens, const Bm25Index& index);

RankedList search_sparse(const Bm25Index& index, const SparseVector& query, std::size_t limit);

inline constexpr const char* kSparseSnapshotMagic = "MMSPARSE1";

}  // namespace medmatch
