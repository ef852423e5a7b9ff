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
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medmatch/embedder.hpp"
#include "medmatch/fusion.hpp"
#include "medmatch/sparse_index.hpp"
#include "medmatch/textnorm.hpp"

namespace medmatch {

enum class RetrievalMode { sparse, dense, hybrid };

/// Storage scalar of the index-side dense vectors. Queries are exact
/// brute-force scans, so halving the bytes per component halves the scan.
using IndexScalar = float;

struct RetrieverConfig {
  NormalizerConfig normalizer;
  Bm25Params bm25;
  RrfConfig fusion;
  std::size_t depth = 100;  // per-ranking truncation before fusion
};

/// A text prepared for indexing or querying: tokens for BM25 and, when the
/// embedder could produce one, a dense vector.
struct PreparedText {
  TokenStream tokens;
  std::optional<Vector> embedding;
};

PreparedText prepare_text(std::string_view key, std::string_view text, const NormalizerConfig& normalizer,
                          const Embedder* embedder);

/// BM25 index and dense store over the same documents. Copyable value; the
/// service publishes copies as immutable snapshots.
class HybridIndex {
 public:
  HybridIndex() = default;
  HybridIndex(std::shared_ptr<const RetrieverConfig> config, std::shared_ptr<const Embedder> embedder);

  /// Replaces the contents. Documents without an embedding are left out of
  /// the dense store only.
  void build(const std::vector<std::pair<DocRef, PreparedText>>& docs);
  void append(const DocRef& ref, const PreparedText& doc);

  PreparedText prepare(std::string_view key, std::string_view text) const;

  /// Sparse, dense or RRF-fused ranking, at most `limit` long. Dense and
  /// hybrid throw UnembeddableError when the query has no embedding.
  RankedList retrieve(const PreparedText& query, RetrievalMode mode, std::size_t limit) const;

  const Bm25Index& sparse() const noexcept { return sparse_; }
  const DenseIndexStore<IndexScalar>& dense() const noexcept { return dense_; }
  const RetrieverConfig& config() const noexcept { return *config_; }
  const Embedder* embedder() const noexcept { return embedder_.get(); }

 private:
  std::shared_ptr<const RetrieverConfig> config_;
  std::shared_ptr<const Embedder> embedder_;
  Bm25Index sparse_;
  DenseIndexStore<IndexScalar> dense_;
};

const char* to_string(RetrievalMode mode);
RetrievalMode parse_retrieval_mode(std::string_view name);

}  // namespace medmatch
