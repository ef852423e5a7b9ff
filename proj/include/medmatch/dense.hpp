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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medmatch/error.hpp"
#include "medmatch/ranked_list.hpp"

namespace medmatch {

template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// L2 norm accumulated left to right, so results do not depend on the
/// vectorization Eigen picks for the target.
template <typename Derived>
typename Derived::Scalar sequential_norm(const Eigen::MatrixBase<Derived>& v) {
  typename Derived::Scalar sum(0);
  for (Eigen::Index i = 0; i < v.size(); ++i) sum += v(i) * v(i);
  return std::sqrt(sum);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.array().isFinite().all();
}

/// Unit-norm copy of `v`. Throws UnembeddableError for a zero vector.
template <typename Derived>
DenseVector<typename Derived::Scalar> normalized(const Eigen::MatrixBase<Derived>& v,
                                                 const std::string& what = "vector") {
  const auto norm = sequential_norm(v);
  if (!(norm > 0)) throw UnembeddableError(what + " has zero norm");
  return v / norm;
}

/// Ranks `scores[i]` for `refs[i]`: best `limit` by score, ties by tie_break_less.
template <typename Scalar>
RankedList rank_scores(const DenseVector<Scalar>& scores, const std::vector<DocRef>& refs, std::size_t limit) {
  std::vector<std::size_t> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    const auto sa = scores(static_cast<Eigen::Index>(a));
    const auto sb = scores(static_cast<Eigen::Index>(b));
    if (sa != sb) return sa > sb;
    return tie_break_less(refs[a], refs[b]);
  };
  const std::size_t keep = std::min(limit, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), better);
  RankedList out;
  out.items.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r) {
    const auto i = order[r];
    out.items.push_back({refs[i], static_cast<double>(scores(static_cast<Eigen::Index>(i))), r + 1});
  }
  return out;
}

/// Exact cosine-similarity store. Vectors are normalized on insertion and
/// kept as the columns of one matrix, so a query is a single mat-vec.
template <typename Scalar>
class DenseIndexStore {
 public:
  using Vector = DenseVector<Scalar>;

  explicit DenseIndexStore(Eigen::Index dim = 0) : dim_(dim), vectors_(dim, 0) {}

  Eigen::Index dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return refs_.size(); }
  bool empty() const noexcept { return refs_.empty(); }
  const std::vector<DocRef>& refs() const noexcept { return refs_; }

  auto vectors() const { return vectors_.leftCols(static_cast<Eigen::Index>(refs_.size())); }

  void reserve(std::size_t n) {
    if (static_cast<Eigen::Index>(n) > vectors_.cols()) vectors_.conservativeResize(dim_, static_cast<Eigen::Index>(n));
    refs_.reserve(n);
  }

  template <typename Derived>
  void add(DocRef ref, const Eigen::MatrixBase<Derived>& v) {
    if (v.size() != dim_) {
      throw DimensionError(ref.key() + ": expected dimension " + std::to_string(dim_) + ", got " +
                           std::to_string(v.size()));
    }
    if (!all_finite(v)) throw DataError(ref.key() + ": non-finite component");
    const auto n = static_cast<Eigen::Index>(refs_.size());
    if (n == vectors_.cols()) vectors_.conservativeResize(dim_, std::max<Eigen::Index>(16, 2 * n));
    vectors_.col(n) = normalized(v.template cast<Scalar>(), ref.key());
    refs_.push_back(std::move(ref));
  }

  /// Exact top-`limit` by cosine similarity; the query is normalized first.
  template <typename Derived>
  RankedList search(const Eigen::MatrixBase<Derived>& query, std::size_t limit) const {
    if (limit == 0) throw std::invalid_argument("search limit must be >= 1");
    if (query.size() != dim_) {
      throw DimensionError("query dimension " + std::to_string(query.size()) + " != store dimension " +
                           std::to_string(dim_));
    }
    const Vector q = normalized(query.template cast<Scalar>(), "query");
    const Vector scores = vectors().transpose() * q;
    return rank_scores<Scalar>(scores, refs_, limit);
  }

 private:
  Eigen::Index dim_;
  DenseMatrix<Scalar> vectors_;  // dim × capacity
  std::vector<DocRef> refs_;
};

template <typename Scalar, typename Derived>
RankedList search_dense(const DenseIndexStore<Scalar>& store, const Eigen::MatrixBase<Derived>& query,
                        std::size_t limit) {
  return store.search(query, limit);
}

/// Linear map applied to frozen base embeddings.
template <typename Scalar>
struct AdapterMatrix {
  DenseMatrix<Scalar> w;  // d_out × d_in

  Eigen::Index d_in() const noexcept { return w.cols(); }
  Eigen::Index d_out() const noexcept { return w.rows(); }

  static AdapterMatrix identity(Eigen::Index dim) { return {DenseMatrix<Scalar>::Identity(dim, dim)}; }
};

/// normalize(W v). Throws DimensionError or UnembeddableError.
template <typename Scalar, typename Derived>
DenseVector<Scalar> apply_adapter(const AdapterMatrix<Scalar>& adapter, const Eigen::MatrixBase<Derived>& v) {
  if (v.size() != adapter.d_in()) {
    throw DimensionError("adapter expects dimension " + std::to_string(adapter.d_in()) + ", got " +
                         std::to_string(v.size()));
  }
  const DenseVector<Scalar> projected = adapter.w * v.template cast<Scalar>();
  return normalized(projected, "adapted embedding");
}

}  // namespace medmatch
