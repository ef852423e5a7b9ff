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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medmatch/dense.hpp"

namespace medmatch {

/// In-batch (anchor, positive) pairs stored as columns: anchors.col(i)
/// belongs with positives.col(i); every other positive is a negative for it.
template <typename Scalar>
struct TrainBatch {
  DenseMatrix<Scalar> anchors;    // d_in × B
  DenseMatrix<Scalar> positives;  // d_in × B

  Eigen::Index size() const noexcept { return anchors.cols(); }
};

template <typename Scalar>
struct LossAndGradient {
  Scalar loss{0};
  DenseMatrix<Scalar> grad;  // same shape as W
};

/// MultipleNegativesRankingLoss of the adapter W over one batch.
///
/// With a_i = normalize(W anchor_i), p_j = normalize(W positive_j) and
/// S_ij = scale * a_i . p_j, the loss is the mean over rows of
/// logsumexp_j(S_ij) - S_ii. The gradient is exact, including the
/// Jacobians of both normalizations.
template <typename Scalar>
LossAndGradient<Scalar> mnrl_loss(const TrainBatch<Scalar>& batch, const AdapterMatrix<Scalar>& adapter, Scalar scale) {
  using Matrix = DenseMatrix<Scalar>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  const Eigen::Index b = batch.size();
  if (b < 1 || batch.positives.cols() != b) throw std::invalid_argument("mnrl_loss: batch needs B >= 1 matched columns");
  if (batch.anchors.rows() != adapter.d_in() || batch.positives.rows() != adapter.d_in()) {
    throw DimensionError("mnrl_loss: batch dimension does not match adapter input");
  }

  const Matrix u = adapter.w * batch.anchors;
  const Matrix v = adapter.w * batch.positives;
  const RowVector u_norm = u.colwise().norm();
  const RowVector v_norm = v.colwise().norm();
  for (Eigen::Index i = 0; i < b; ++i) {
    if (!(u_norm(i) > 0)) throw UnembeddableError("mnrl_loss: anchor row " + std::to_string(i) + " projects to zero");
    if (!(v_norm(i) > 0)) throw UnembeddableError("mnrl_loss: positive row " + std::to_string(i) + " projects to zero");
  }
  const Matrix a = u.array().rowwise() / u_norm.array();
  const Matrix p = v.array().rowwise() / v_norm.array();

  const Matrix s = scale * (a.transpose() * p);  // B × B
  Matrix softmax(b, b);
  Scalar loss(0);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Scalar m = s.row(i).maxCoeff();
    const RowVector e = (s.row(i).array() - m).exp().matrix();
    const Scalar z = e.sum();
    loss += m + std::log(z) - s(i, i);
    softmax.row(i) = e / z;
  }
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(b);
  loss *= inv_b;

  // dL/dS = (softmax - I) / B
  const Matrix g = (softmax - Matrix::Identity(b, b)) * inv_b;
  const Matrix d_a = scale * (p * g.transpose());
  const Matrix d_p = scale * (a * g);

  // Back through x / |x|: (I - x̂ x̂ᵀ) / |x|
  const RowVector a_proj = (a.array() * d_a.array()).colwise().sum();
  const RowVector p_proj = (p.array() * d_p.array()).colwise().sum();
  const Matrix d_u = (d_a - (a.array().rowwise() * a_proj.array()).matrix()).array().rowwise() / u_norm.array();
  const Matrix d_v = (d_p - (p.array().rowwise() * p_proj.array()).matrix()).array().rowwise() / v_norm.array();

  LossAndGradient<Scalar> out;
  out.loss = loss;
  out.grad = d_u * batch.anchors.transpose() + d_v * batch.positives.transpose();
  return out;
}

/// Linear warmup to `peak` over ceil(warmup_ratio * total_steps) steps,
/// then half-cosine decay to zero at `total_steps`.
double scheduled_lr(std::size_t step, std::size_t total_steps, double peak, double warmup_ratio);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 1.0;
  double warmup_ratio = 0.1;
  double scale = 20.0;
  std::uint64_t seed = 0;
  std::size_t d_out = 0;  // 0: same as input dimension

  /// The transformer fine-tuning hyperparameters (AdamW-scale learning rate).
  static TrainConfig transformer_reference();
};

struct TrainingPair {
  DenseVector<double> anchor;
  DenseVector<double> positive;
  std::string masterlist_id;
};

struct TrainResult {
  AdapterMatrix<double> adapter;
  std::vector<double> epoch_loss;  // mean batch loss seen during each epoch
  std::size_t steps = 0;
  std::size_t batch_collisions = 0;  // pairs admitted despite a same-id clash
};

/// Plain gradient descent on mnrl_loss with the warmup + cosine schedule.
/// Batches are drawn per epoch from a seeded shuffle; a pair whose
/// masterlist id already sits in the current batch is redrawn up to 10
/// times before it is admitted and counted in `batch_collisions`.
TrainResult train_adapter(const std::vector<TrainingPair>& pairs, const TrainConfig& config);

/// `{"d_in": n, "d_out": m, "w": [[...], ...]}`, row-major.
void save_adapter(std::ostream& out, const AdapterMatrix<double>& adapter);
void save_adapter(const std::filesystem::path& path, const AdapterMatrix<double>& adapter);
AdapterMatrix<double> read_adapter(std::istream& in);
AdapterMatrix<double> load_adapter(const std::filesystem::path& path);

}  // namespace medmatch
