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
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>

#include "medmatch/dense.hpp"

namespace medmatch {

using Vector = DenseVector<double>;

enum class EmbedderKind { file_backed, hash_ngram, adapted };

struct HashNgramParams {
  std::size_t dim = 256;
  std::size_t n_min = 3;
  std::size_t n_max = 5;
  std::uint64_t salt = 0;
};

/// Turns a text into a unit-norm vector. `key` identifies the text for
/// embedders backed by precomputed vectors ("M:<id>" / "P:<pair_index>");
/// text-based embedders ignore it. Throws UnembeddableError when no vector
/// can be produced.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual EmbedderKind kind() const = 0;
  virtual Vector embed(std::string_view key, std::string_view text) const = 0;
};

/// Salted FNV-1a feature hashing of character n-grams, ±1 sign from the
/// top hash bit, L2-normalized.
Vector embed_hash(std::string_view text, const HashNgramParams& params);

class HashNgramEmbedder final : public Embedder {
 public:
  explicit HashNgramEmbedder(HashNgramParams params = {});
  std::size_t dim() const override { return params_.dim; }
  EmbedderKind kind() const override { return EmbedderKind::hash_ngram; }
  Vector embed(std::string_view key, std::string_view text) const override;
  const HashNgramParams& params() const noexcept { return params_; }

 private:
  HashNgramParams params_;
};

using EmbeddingTable = std::unordered_map<std::string, Vector>;

/// JSON Lines `{"id": "...", "vector": [...]}`. Every vector is checked for
/// dimension and finiteness, then normalized.
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim);
EmbeddingTable read_embeddings(std::istream& in, std::size_t dim);

class FileBackedEmbedder final : public Embedder {
 public:
  FileBackedEmbedder(EmbeddingTable table, std::size_t dim);
  std::size_t dim() const override { return dim_; }
  EmbedderKind kind() const override { return EmbedderKind::file_backed; }
  Vector embed(std::string_view key, std::string_view text) const override;

 private:
  EmbeddingTable table_;
  std::size_t dim_;
};

class AdaptedEmbedder final : public Embedder {
 public:
  AdaptedEmbedder(std::shared_ptr<const Embedder> base, AdapterMatrix<double> adapter);
  std::size_t dim() const override { return static_cast<std::size_t>(adapter_.d_out()); }
  EmbedderKind kind() const override { return EmbedderKind::adapted; }
  Vector embed(std::string_view key, std::string_view text) const override;
  const Embedder& base() const noexcept { return *base_; }

 private:
  std::shared_ptr<const Embedder> base_;
  AdapterMatrix<double> adapter_;
};

/// Declarative embedder description, resolved by make_embedder().
struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::hash_ngram;
  std::size_t dim = 256;  // file_backed: expected vector dimension
  HashNgramParams hash;
  std::filesystem::path embeddings_path;  // file_backed
  std::filesystem::path adapter_path;     // adapted
  std::shared_ptr<const EmbedderSpec> base;  // adapted
};

std::shared_ptr<const Embedder> make_embedder(const EmbedderSpec& spec);

}  // namespace medmatch
