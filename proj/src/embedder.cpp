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

#include "medmatch/embedder.hpp"

#include <fstream>

#include <json.hpp>

#include "medmatch/hashing.hpp"
#include "medmatch/metric_trainer.hpp"
#include "medmatch/textnorm.hpp"

namespace medmatch {

Vector embed_hash(std::string_view text, const HashNgramParams& params) {
  if (params.dim == 0) throw std::invalid_argument("hash embedder dimension must be > 0");
  Vector raw = Vector::Zero(static_cast<Eigen::Index>(params.dim));
  for (const auto& gram : char_ngrams(text, params.n_min, params.n_max)) {
    const std::uint64_t h = salted_fnv1a64(params.salt, gram);
    const auto bucket = static_cast<Eigen::Index>(h % params.dim);
    raw(bucket) += (h >> 63) ? -1.0 : 1.0;
  }
  const double norm = sequential_norm(raw);
  if (!(norm > 0.0)) throw UnembeddableError("text has no features to embed: '" + std::string(text) + "'");
  return raw / norm;
}

HashNgramEmbedder::HashNgramEmbedder(HashNgramParams params) : params_(params) {
  if (params_.dim == 0) throw std::invalid_argument("hash embedder dimension must be > 0");
  if (params_.n_min < 1 || params_.n_min > params_.n_max) {
    throw std::invalid_argument("hash embedder needs 1 <= n_min <= n_max");
  }
}

Vector HashNgramEmbedder::embed(std::string_view, std::string_view text) const { return embed_hash(text, params_); }

EmbeddingTable read_embeddings(std::istream& in, std::size_t dim) {
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("embeddings", line_no, e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string() || !rec.contains("vector") ||
        !rec["vector"].is_array()) {
      throw ParseError("embeddings", line_no, "expected {\"id\": string, \"vector\": [numbers]}");
    }
    const auto id = rec["id"].get<std::string>();
    const auto& values = rec["vector"];
    if (values.size() != dim) {
      throw DimensionError("embedding '" + id + "' has dimension " + std::to_string(values.size()) + ", expected " +
                           std::to_string(dim));
    }
    Vector v(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      if (!values[i].is_number()) throw DataError("embedding '" + id + "' has a non-numeric component");
      v(static_cast<Eigen::Index>(i)) = values[i].get<double>();
    }
    if (!all_finite(v)) throw DataError("embedding '" + id + "' has a non-finite component");
    if (!(sequential_norm(v) > 0.0)) throw DataError("embedding '" + id + "' is the zero vector");
    if (!table.emplace(id, normalized(v, id)).second) throw DataError("duplicate embedding id '" + id + "'");
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file " + path.string());
  return read_embeddings(in, dim);
}

FileBackedEmbedder::FileBackedEmbedder(EmbeddingTable table, std::size_t dim) : table_(std::move(table)), dim_(dim) {}

Vector FileBackedEmbedder::embed(std::string_view key, std::string_view) const {
  auto it = table_.find(std::string(key));
  if (it == table_.end()) throw UnembeddableError("no precomputed embedding for '" + std::string(key) + "'");
  return it->second;
}

AdaptedEmbedder::AdaptedEmbedder(std::shared_ptr<const Embedder> base, AdapterMatrix<double> adapter)
    : base_(std::move(base)), adapter_(std::move(adapter)) {
  if (static_cast<Eigen::Index>(base_->dim()) != adapter_.d_in()) {
    throw DimensionError("adapter input dimension " + std::to_string(adapter_.d_in()) +
                         " does not match base embedder dimension " + std::to_string(base_->dim()));
  }
}

Vector AdaptedEmbedder::embed(std::string_view key, std::string_view text) const {
  return apply_adapter(adapter_, base_->embed(key, text));
}

std::shared_ptr<const Embedder> make_embedder(const EmbedderSpec& spec) {
  switch (spec.kind) {
    case EmbedderKind::hash_ngram:
      return std::make_shared<HashNgramEmbedder>(spec.hash);
    case EmbedderKind::file_backed:
      return std::make_shared<FileBackedEmbedder>(load_embeddings(spec.embeddings_path, spec.dim), spec.dim);
    case EmbedderKind::adapted: {
      if (!spec.base) throw std::invalid_argument("adapted embedder needs a base spec");
      return std::make_shared<AdaptedEmbedder>(make_embedder(*spec.base), load_adapter(spec.adapter_path));
    }
  }
  throw std::invalid_argument("unknown embedder kind");
}

}  // namespace medmatch
