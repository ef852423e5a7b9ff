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

#include "medmatch/sparse_index.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "medmatch/error.hpp"

namespace medmatch {

double SparseVector::weight(TermId term) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), term,
                             [](const auto& e, TermId t) { return e.first < t; });
  return it != entries.end() && it->first == term ? it->second : 0.0;
}

double dot(const SparseVector& a, const SparseVector& b) {
  double sum = 0.0;
  auto i = a.entries.begin();
  auto j = b.entries.begin();
  while (i != a.entries.end() && j != b.entries.end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      sum += i->second * j->second;
      ++i;
      ++j;
    }
  }
  return sum;
}

Bm25Index Bm25Index::build(const std::vector<std::pair<DocRef, TokenStream>>& docs, Bm25Params params) {
  if (params.k1 < 0.0) throw std::invalid_argument("BM25 k1 must be >= 0");
  if (params.b < 0.0 || params.b > 1.0) throw std::invalid_argument("BM25 b must lie in [0, 1]");

  Bm25Index index;
  index.params_ = params;
  std::size_t total = 0;
  for (const auto& [ref, tokens] : docs) total += tokens.size();
  index.avgdl_ = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
  if (!docs.empty() && index.avgdl_ <= 0.0) index.avgdl_ = 1.0;  // every document empty

  index.refs_.reserve(docs.size());
  index.vectors_.reserve(docs.size());
  for (const auto& [ref, tokens] : docs) index.add_vector(ref, tokens);
  return index;
}

void Bm25Index::append(DocRef ref, const TokenStream& tokens) {
  if (refs_.empty() && avgdl_ <= 0.0) avgdl_ = tokens.empty() ? 1.0 : static_cast<double>(tokens.size());
  add_vector(std::move(ref), tokens);
}

TermId Bm25Index::intern(const std::string& term) {
  auto [it, inserted] = vocabulary_.try_emplace(term, static_cast<TermId>(terms_.size()));
  if (inserted) {
    terms_.push_back(term);
    df_.push_back(0);
    postings_.emplace_back();
  }
  return it->second;
}

void Bm25Index::add_vector(DocRef ref, const TokenStream& tokens) {
  std::map<TermId, std::size_t> tf;
  for (const auto& t : tokens) ++tf[intern(t)];

  const auto doc = static_cast<std::uint32_t>(refs_.size());
  SparseVector vec;
  vec.entries.reserve(tf.size());
  for (const auto& [term, count] : tf) {
    const double w = doc_weight(count, tokens.size());
    ++df_[term];
    if (w > 0.0) {
      vec.entries.emplace_back(term, w);
      postings_[term].push_back({doc, w});
    }
  }
  refs_.push_back(std::move(ref));
  vectors_.push_back(std::move(vec));
  lengths_.push_back(tokens.size());
}

std::optional<TermId> Bm25Index::term_id(const std::string& term) const {
  auto it = vocabulary_.find(term);
  if (it == vocabulary_.end()) return std::nullopt;
  return it->second;
}

double Bm25Index::idf(TermId id) const {
  const auto n = static_cast<double>(refs_.size());
  const auto d = static_cast<double>(df_.at(id));
  return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

double Bm25Index::doc_weight(std::size_t tf, std::size_t length) const {
  const double f = static_cast<double>(tf);
  const double norm = 1.0 - params_.b + params_.b * static_cast<double>(length) / avgdl_;
  const double denom = f + params_.k1 * norm;
  return denom > 0.0 ? f * (params_.k1 + 1.0) / denom : 0.0;
}

RankedList Bm25Index::search(const SparseVector& query, std::size_t limit) const {
  if (limit == 0) throw std::invalid_argument("search limit must be >= 1");
  std::vector<double> scores(refs_.size(), 0.0);
  std::vector<std::uint32_t> touched;
  for (const auto& [term, qw] : query.entries) {
    if (term >= postings_.size()) continue;
    for (const auto& p : postings_[term]) {
      if (scores[p.doc] == 0.0) touched.push_back(p.doc);
      scores[p.doc] += qw * p.weight;
    }
  }
  std::erase_if(touched, [&](std::uint32_t doc) { return !(scores[doc] > 0.0); });
  const auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return tie_break_less(refs_[a], refs_[b]);
  };
  const std::size_t keep = std::min(limit, touched.size());
  std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(keep), touched.end(), better);
  RankedList out;
  out.items.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r) out.items.push_back({refs_[touched[r]], scores[touched[r]], r + 1});
  return out;
}

SparseVector embed_query_sparse(const TokenStream& tokens, const Bm25Index& index) {
  std::map<TermId, std::size_t> tf;
  for (const auto& t : tokens) {
    if (auto id = index.term_id(t)) ++tf[*id];
  }
  SparseVector q;
  for (const auto& [term, count] : tf) {
    const double w = static_cast<double>(count) * index.idf(term);
    if (w > 0.0) q.entries.emplace_back(term, w);
  }
  return q;
}

RankedList search_sparse(const Bm25Index& index, const SparseVector& query, std::size_t limit) {
  return index.search(query, limit);
}

namespace {

const char* kind_name(DocKind k) { return k == DocKind::masterlist_entry ? "masterlist_entry" : "mapping_pair"; }

}  // namespace

void Bm25Index::save(std::ostream& out) const {
  nlohmann::json j;
  j["k1"] = params_.k1;
  j["b"] = params_.b;
  j["avgdl"] = avgdl_;
  j["vocabulary"] = terms_;
  j["df"] = df_;
  auto& docs = j["docs"] = nlohmann::json::array();
  for (std::size_t i = 0; i < refs_.size(); ++i) {
    nlohmann::json d;
    d["kind"] = kind_name(refs_[i].kind);
    d["masterlist_id"] = refs_[i].masterlist_id;
    if (refs_[i].pair_index) d["pair_index"] = *refs_[i].pair_index;
    d["length"] = lengths_[i];
    auto& terms = d["terms"] = nlohmann::json::array();
    for (const auto& [t, w] : vectors_[i].entries) terms.push_back({t, w});
    docs.push_back(std::move(d));
  }
  out << kSparseSnapshotMagic << '\n' << j.dump() << '\n';
}

Bm25Index Bm25Index::load(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != kSparseSnapshotMagic) {
    throw ParseError("sparse snapshot", 1, std::string("expected magic ") + kSparseSnapshotMagic);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("sparse snapshot", 2, e.what());
  }
  try {
    Bm25Index index;
    index.params_ = {j.at("k1").get<double>(), j.at("b").get<double>()};
    index.avgdl_ = j.at("avgdl").get<double>();
    for (const auto& t : j.at("vocabulary")) index.intern(t.get<std::string>());
    const auto df = j.at("df").get<std::vector<std::size_t>>();
    if (df.size() != index.terms_.size()) throw DataError("sparse snapshot: df table size mismatch");
    index.df_ = df;
    for (const auto& d : j.at("docs")) {
      const auto kind = d.at("kind").get<std::string>();
      DocRef ref = kind == "masterlist_entry"
                       ? DocRef::entry(d.at("masterlist_id").get<std::string>())
                       : DocRef::pair(d.at("masterlist_id").get<std::string>(), d.at("pair_index").get<std::size_t>());
      SparseVector vec;
      const auto doc = static_cast<std::uint32_t>(index.refs_.size());
      for (const auto& tw : d.at("terms")) {
        const auto term = tw.at(0).get<TermId>();
        const auto w = tw.at(1).get<double>();
        if (term >= index.terms_.size()) throw DataError("sparse snapshot: term id out of range");
        vec.entries.emplace_back(term, w);
        index.postings_[term].push_back({doc, w});
      }
      index.refs_.push_back(std::move(ref));
      index.vectors_.push_back(std::move(vec));
      index.lengths_.push_back(d.at("length").get<std::size_t>());
    }
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("sparse snapshot", 2, e.what());
  }
}

}  // namespace medmatch
