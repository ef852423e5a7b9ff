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

#include "medmatch/metric_trainer.hpp"

#include <algorithm>
#include <fstream>
#include <numbers>
#include <random>
#include <unordered_set>

#include <json.hpp>

namespace medmatch {

namespace {

constexpr int kRedrawAttempts = 10;

// std::shuffle and the std distributions are implementation-defined; these
// keep training bit-identical across standard libraries.
std::size_t draw_below(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double draw_gaussian(std::mt19937_64& rng) {
  constexpr double kTwo53 = 9007199254740992.0;
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) / (kTwo53 + 1.0);
  const double u2 = static_cast<double>(rng() >> 11) / kTwo53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

AdapterMatrix<double> initial_adapter(Eigen::Index d_in, Eigen::Index d_out, std::mt19937_64& rng) {
  if (d_out == d_in) return AdapterMatrix<double>::identity(d_in);
  DenseMatrix<double> g(d_in, d_out);
  for (Eigen::Index j = 0; j < d_out; ++j) {
    for (Eigen::Index i = 0; i < d_in; ++i) g(i, j) = draw_gaussian(rng);
  }
  Eigen::HouseholderQR<DenseMatrix<double>> qr(g);
  const DenseMatrix<double> q = qr.householderQ() * DenseMatrix<double>::Identity(d_in, d_out);
  return {q.transpose()};
}

// Deals one epoch into batches of distinct masterlist ids where possible.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<TrainingPair>& pairs, std::size_t batch_size,
                                                   std::mt19937_64& rng, std::size_t& collisions) {
  std::vector<std::size_t> pool(pairs.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

  std::vector<std::vector<std::size_t>> batches;
  while (!pool.empty()) {
    std::vector<std::size_t> batch;
    std::unordered_set<std::string_view> ids;
    while (batch.size() < batch_size && !pool.empty()) {
      std::size_t slot = draw_below(rng, pool.size());
      for (int attempt = 0; attempt < kRedrawAttempts && ids.contains(pairs[pool[slot]].masterlist_id); ++attempt) {
        slot = draw_below(rng, pool.size());
      }
      const std::size_t chosen = pool[slot];
      if (!ids.insert(pairs[chosen].masterlist_id).second) ++collisions;
      batch.push_back(chosen);
      pool[slot] = pool.back();
      pool.pop_back();
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace

double scheduled_lr(std::size_t step, std::size_t total_steps, double peak, double warmup_ratio) {
  if (total_steps == 0) return 0.0;
  const auto warmup = static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  if (step >= total_steps) return 0.0;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainConfig TrainConfig::transformer_reference() {
  TrainConfig c;
  c.epochs = 20;
  c.batch_size = 4096;
  c.lr = 2e-5;
  c.warmup_ratio = 0.1;
  return c;
}

TrainResult train_adapter(const std::vector<TrainingPair>& pairs, const TrainConfig& config) {
  if (pairs.empty()) throw std::invalid_argument("train_adapter: no training pairs");
  if (config.batch_size < 1) throw std::invalid_argument("train_adapter: batch_size must be >= 1");
  if (!(config.lr > 0.0)) throw std::invalid_argument("train_adapter: lr must be > 0");
  if (!(config.scale > 0.0)) throw std::invalid_argument("train_adapter: scale must be > 0");
  if (config.warmup_ratio < 0.0 || config.warmup_ratio > 1.0) {
    throw std::invalid_argument("train_adapter: warmup_ratio must lie in [0, 1]");
  }

  const Eigen::Index d_in = pairs.front().anchor.size();
  for (const auto& p : pairs) {
    if (p.anchor.size() != d_in || p.positive.size() != d_in) {
      throw DimensionError("train_adapter: inconsistent input dimensions");
    }
  }
  const Eigen::Index d_out = config.d_out == 0 ? d_in : static_cast<Eigen::Index>(config.d_out);
  if (d_out > d_in) throw std::invalid_argument("train_adapter: d_out cannot exceed d_in");

  std::mt19937_64 rng(config.seed);
  TrainResult result;
  result.adapter = initial_adapter(d_in, d_out, rng);

  const std::size_t per_epoch = (pairs.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = per_epoch * config.epochs;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_batches(pairs, config.batch_size, rng, result.batch_collisions);
    double epoch_loss = 0.0;
    for (const auto& members : batches) {
      TrainBatch<double> batch{DenseMatrix<double>(d_in, static_cast<Eigen::Index>(members.size())),
                               DenseMatrix<double>(d_in, static_cast<Eigen::Index>(members.size()))};
      for (std::size_t c = 0; c < members.size(); ++c) {
        batch.anchors.col(static_cast<Eigen::Index>(c)) = pairs[members[c]].anchor;
        batch.positives.col(static_cast<Eigen::Index>(c)) = pairs[members[c]].positive;
      }
      const auto lg = mnrl_loss(batch, result.adapter, config.scale);
      epoch_loss += lg.loss;
      result.adapter.w -= scheduled_lr(step, total_steps, config.lr, config.warmup_ratio) * lg.grad;
      ++step;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(batches.size()));
  }
  result.steps = step;
  return result;
}

void save_adapter(std::ostream& out, const AdapterMatrix<double>& adapter) {
  nlohmann::json j;
  j["d_in"] = adapter.d_in();
  j["d_out"] = adapter.d_out();
  auto& rows = j["w"] = nlohmann::json::array();
  for (Eigen::Index r = 0; r < adapter.d_out(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(adapter.d_in()));
    for (Eigen::Index c = 0; c < adapter.d_in(); ++c) row[static_cast<std::size_t>(c)] = adapter.w(r, c);
    rows.push_back(std::move(row));
  }
  out << j.dump() << '\n';
}

void save_adapter(const std::filesystem::path& path, const AdapterMatrix<double>& adapter) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write adapter file " + path.string());
  save_adapter(out, adapter);
}

AdapterMatrix<double> read_adapter(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("adapter", 0, e.what());
  }
  try {
    const auto d_in = j.at("d_in").get<Eigen::Index>();
    const auto d_out = j.at("d_out").get<Eigen::Index>();
    if (d_in <= 0 || d_out <= 0) throw DataError("adapter dimensions must be positive");
    const auto& rows = j.at("w");
    if (static_cast<Eigen::Index>(rows.size()) != d_out) throw DimensionError("adapter row count != d_out");
    AdapterMatrix<double> a{DenseMatrix<double>(d_out, d_in)};
    for (Eigen::Index r = 0; r < d_out; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      if (static_cast<Eigen::Index>(row.size()) != d_in) throw DimensionError("adapter row length != d_in");
      for (Eigen::Index c = 0; c < d_in; ++c) a.w(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    if (!all_finite(a.w)) throw DataError("adapter has non-finite entries");
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("adapter", 0, e.what());
  }
}

AdapterMatrix<double> load_adapter(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open adapter file " + path.string());
  return read_adapter(in);
}

}  // namespace medmatch
