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

#include "medmatch/retrieval.hpp"

#include <array>
#include <stdexcept>

#include "medmatch/error.hpp"

namespace medmatch {

PreparedText prepare_text(std::string_view key, std::string_view text, const NormalizerConfig& normalizer,
                          const Embedder* embedder) {
  PreparedText out;
  out.tokens = normalize(text, normalizer);
  if (embedder) {
    try {
      out.embedding = embedder->embed(key, text);
    } catch (const UnembeddableError&) {
      out.embedding.reset();
    }
  }
  return out;
}

HybridIndex::HybridIndex(std::shared_ptr<const RetrieverConfig> config, std::shared_ptr<const Embedder> embedder)
    : config_(std::move(config)),
      embedder_(std::move(embedder)),
      sparse_(Bm25Index::build({}, config_->bm25)),
      dense_(embedder_ ? static_cast<Eigen::Index>(embedder_->dim()) : 0) {}

void HybridIndex::build(const std::vector<std::pair<DocRef, PreparedText>>& docs) {
  std::vector<std::pair<DocRef, TokenStream>> sparse_docs;
  sparse_docs.reserve(docs.size());
  dense_ = DenseIndexStore<IndexScalar>(dense_.dim());
  dense_.reserve(docs.size());
  for (const auto& [ref, doc] : docs) {
    sparse_docs.emplace_back(ref, doc.tokens);
    if (embedder_ && doc.embedding) dense_.add(ref, *doc.embedding);
  }
  sparse_ = Bm25Index::build(sparse_docs, config_->bm25);
}

void HybridIndex::append(const DocRef& ref, const PreparedText& doc) {
  sparse_.append(ref, doc.tokens);
  if (embedder_ && doc.embedding) dense_.add(ref, *doc.embedding);
}

PreparedText HybridIndex::prepare(std::string_view key, std::string_view text) const {
  return prepare_text(key, text, config_->normalizer, embedder_.get());
}

RankedList HybridIndex::retrieve(const PreparedText& query, RetrievalMode mode, std::size_t limit) const {
  if (limit == 0) throw std::invalid_argument("retrieve: limit must be >= 1");
  const auto dense_ranking = [&](std::size_t n) {
    if (!embedder_) throw std::logic_error("dense retrieval requested without an embedder");
    if (!query.embedding) throw UnembeddableError("query has no dense embedding");
    if (dense_.empty()) return RankedList{};
    return dense_.search(*query.embedding, n);
  };
  const auto sparse_ranking = [&](std::size_t n) {
    return sparse_.search(embed_query_sparse(query.tokens, sparse_), n);
  };

  switch (mode) {
    case RetrievalMode::sparse:
      return sparse_ranking(limit);
    case RetrievalMode::dense:
      return dense_ranking(limit);
    case RetrievalMode::hybrid: {
      const std::size_t depth = std::max(config_->depth, limit);
      const std::array<RankedList, 2> inputs{dense_ranking(depth), sparse_ranking(depth)};
      return rrf_fuse(inputs, config_->fusion, limit);
    }
  }
  throw std::invalid_argument("unknown retrieval mode");
}

const char* to_string(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::sparse: return "sparse";
    case RetrievalMode::dense: return "dense";
    case RetrievalMode::hybrid: return "hybrid";
  }
  return "?";
}

RetrievalMode parse_retrieval_mode(std::string_view name) {
  if (name == "sparse") return RetrievalMode::sparse;
  if (name == "dense") return RetrievalMode::dense;
  if (name == "hybrid") return RetrievalMode::hybrid;
  throw std::invalid_argument("unknown retrieval mode '" + std::string(name) + "'");
}

}  // namespace medmatch
