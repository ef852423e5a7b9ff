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

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "medmatch/corpus.hpp"
#include "medmatch/retrieval.hpp"

namespace medmatch {

enum class Scenario { masterlist_only, masterlist_plus_pairs };

const char* to_string(Scenario scenario);
Scenario parse_scenario(std::string_view name);

inline constexpr std::array<std::size_t, 4> kAccuracyCutoffs{1, 3, 5, 100};

/// Acc@{1,3,5,100}, in the order of kAccuracyCutoffs.
using AccuracyRow = std::array<double, kAccuracyCutoffs.size()>;

struct ResolvedCandidate {
  std::string masterlist_id;
  double score = 0.0;
};

/// Maps candidates to masterlist ids, keeping the first occurrence of each.
std::vector<ResolvedCandidate> resolve_to_masterlist(const RankedList& ranked);

/// 1 when `truth` is among the first k ids.
int accuracy_at_k(std::span<const ResolvedCandidate> resolved, std::string_view truth, std::size_t k);

struct EvalConfig {
  RetrievalMode mode = RetrievalMode::dense;
  Scenario scenario = Scenario::masterlist_only;
  RetrieverConfig retriever;
  std::shared_ptr<const Embedder> embedder;  // required for dense / hybrid
  bool dedup = true;  // collapse to distinct masterlist ids before Acc@k
};

struct Probe {
  std::string key;  // embedding key, "P:<pair_index>"
  std::string text;
  std::string truth;
  std::optional<std::size_t> pair_index;  // lets evaluate_fold reuse EvalCache
};

struct FoldResult {
  AccuracyRow accuracy{};
  std::size_t probes = 0;
  std::vector<std::string> skipped;  // unembeddable probes, counted as misses
};

struct EvalReport {
  RetrievalMode mode = RetrievalMode::dense;
  Scenario scenario = Scenario::masterlist_only;
  bool dedup = true;
  std::vector<FoldResult> per_fold;
  AccuracyRow mean{};
  AccuracyRow std{};  // population standard deviation over folds
};

/// Precomputed tokens and embeddings for every masterlist entry and pair,
/// shared across folds.
class EvalCache {
 public:
  EvalCache(const Corpus& corpus, const EvalConfig& config);
  const PreparedText& entry(std::size_t i) const { return entries_.at(i); }
  const PreparedText& pair(std::size_t i) const { return pairs_.at(i); }

 private:
  std::vector<PreparedText> entries_;
  std::vector<PreparedText> pairs_;
};

/// Runs one gallery/probe split: indexes the masterlist (plus the gallery
/// pairs for masterlist_plus_pairs) and scores every probe.
FoldResult evaluate_fold(const Corpus& corpus, std::span<const std::size_t> gallery, std::span<const Probe> probes,
                         const EvalConfig& config, const EvalCache* cache = nullptr);

/// Every fold in turn as the probe set; per-fold Acc@k plus mean and std.
EvalReport run_eval(const Corpus& corpus, const FoldAssignment& folds, const EvalConfig& config);

/// Mean and population std of per-fold rows.
void aggregate(EvalReport& report);

nlohmann::json to_json(const EvalReport& report);

/// Aligned text table, one row per report: mode, scenario, then
/// mean ± std for each cutoff in percent.
std::string format_table(std::span<const EvalReport> reports);

}  // namespace medmatch
