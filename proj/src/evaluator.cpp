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

#include "medmatch/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "medmatch/error.hpp"

namespace medmatch {

const char* to_string(Scenario scenario) {
  return scenario == Scenario::masterlist_only ? "masterlist_only" : "masterlist_plus_pairs";
}

Scenario parse_scenario(std::string_view name) {
  if (name == "masterlist_only") return Scenario::masterlist_only;
  if (name == "masterlist_plus_pairs") return Scenario::masterlist_plus_pairs;
  throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
}

std::vector<ResolvedCandidate> resolve_to_masterlist(const RankedList& ranked) {
  std::vector<ResolvedCandidate> out;
  std::unordered_set<std::string_view> seen;
  for (const auto& item : ranked.items) {
    if (seen.insert(item.ref.masterlist_id).second) out.push_back({item.ref.masterlist_id, item.score});
  }
  return out;
}

int accuracy_at_k(std::span<const ResolvedCandidate> resolved, std::string_view truth, std::size_t k) {
  if (k == 0) throw std::invalid_argument("accuracy_at_k: k must be >= 1");
  const std::size_t n = std::min(k, resolved.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (resolved[i].masterlist_id == truth) return 1;
  }
  return 0;
}

namespace {

std::vector<ResolvedCandidate> raw_ids(const RankedList& ranked) {
  std::vector<ResolvedCandidate> out;
  out.reserve(ranked.size());
  for (const auto& item : ranked.items) out.push_back({item.ref.masterlist_id, item.score});
  return out;
}

bool needs_embedder(RetrievalMode mode) { return mode != RetrievalMode::sparse; }

const Embedder* active_embedder(const EvalConfig& config) {
  if (!needs_embedder(config.mode)) return nullptr;
  if (!config.embedder) throw std::invalid_argument("dense and hybrid evaluation need an embedder");
  return config.embedder.get();
}

}  // namespace

EvalCache::EvalCache(const Corpus& corpus, const EvalConfig& config) {
  const Embedder* embedder = active_embedder(config);
  const auto& norm = config.retriever.normalizer;
  entries_.reserve(corpus.masterlist().size());
  for (const auto& e : corpus.masterlist()) {
    entries_.push_back(prepare_text(DocRef::entry(e.id).key(), e.text, norm, embedder));
  }
  pairs_.reserve(corpus.pairs().size());
  for (std::size_t i = 0; i < corpus.pairs().size(); ++i) {
    pairs_.push_back(prepare_text("P:" + std::to_string(i), corpus.pairs()[i].clinic_text, norm, embedder));
  }
}

FoldResult evaluate_fold(const Corpus& corpus, std::span<const std::size_t> gallery, std::span<const Probe> probes,
                         const EvalConfig& config, const EvalCache* cache) {
  const Embedder* embedder = active_embedder(config);
  const auto& norm = config.retriever.normalizer;

  std::vector<std::pair<DocRef, PreparedText>> docs;
  docs.reserve(corpus.masterlist().size() + gallery.size());
  for (std::size_t i = 0; i < corpus.masterlist().size(); ++i) {
    const auto& e = corpus.masterlist()[i];
    DocRef ref = DocRef::entry(e.id);
    docs.emplace_back(ref, cache ? cache->entry(i) : prepare_text(ref.key(), e.text, norm, embedder));
  }
  if (config.scenario == Scenario::masterlist_plus_pairs) {
    for (std::size_t i : gallery) {
      const auto& p = corpus.pairs().at(i);
      DocRef ref = DocRef::pair(p.masterlist_id, i);
      docs.emplace_back(ref, cache ? cache->pair(i) : prepare_text(ref.key(), p.clinic_text, norm, embedder));
    }
  }

  auto shared_config = std::make_shared<const RetrieverConfig>(config.retriever);
  std::shared_ptr<const Embedder> shared_embedder = needs_embedder(config.mode) ? config.embedder : nullptr;
  HybridIndex index(shared_config, shared_embedder);
  index.build(docs);

  const std::size_t depth = kAccuracyCutoffs.back();
  FoldResult result;
  result.probes = probes.size();
  std::array<std::size_t, kAccuracyCutoffs.size()> hits{};
  for (const auto& probe : probes) {
    const PreparedText query = cache && probe.pair_index ? cache->pair(*probe.pair_index)
                                                         : prepare_text(probe.key, probe.text, norm, embedder);
    if (embedder && !query.embedding) {
      result.skipped.push_back(probe.key);
      continue;
    }
    const RankedList ranked = index.retrieve(query, config.mode, std::max(depth, config.retriever.depth));
    const auto resolved = config.dedup ? resolve_to_masterlist(ranked) : raw_ids(ranked);
    for (std::size_t c = 0; c < kAccuracyCutoffs.size(); ++c) {
      hits[c] += static_cast<std::size_t>(accuracy_at_k(resolved, probe.truth, kAccuracyCutoffs[c]));
    }
  }
  for (std::size_t c = 0; c < kAccuracyCutoffs.size(); ++c) {
    result.accuracy[c] = probes.empty() ? 0.0 : static_cast<double>(hits[c]) / static_cast<double>(probes.size());
  }
  return result;
}

void aggregate(EvalReport& report) {
  report.mean.fill(0.0);
  report.std.fill(0.0);
  const auto n = static_cast<double>(report.per_fold.size());
  if (report.per_fold.empty()) return;
  for (std::size_t c = 0; c < kAccuracyCutoffs.size(); ++c) {
    double sum = 0.0;
    for (const auto& f : report.per_fold) sum += f.accuracy[c];
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& f : report.per_fold) sq += (f.accuracy[c] - mean) * (f.accuracy[c] - mean);
    report.mean[c] = mean;
    report.std[c] = std::sqrt(sq / n);
  }
}

EvalReport run_eval(const Corpus& corpus, const FoldAssignment& folds, const EvalConfig& config) {
  if (folds.fold_of_pair.size() != corpus.pairs().size()) {
    throw DataError("fold assignment covers " + std::to_string(folds.fold_of_pair.size()) + " pairs, corpus has " +
                    std::to_string(corpus.pairs().size()));
  }
  const EvalCache cache(corpus, config);
  EvalReport report;
  report.mode = config.mode;
  report.scenario = config.scenario;
  report.dedup = config.dedup;
  for (std::size_t f = 0; f < folds.n_folds; ++f) {
    const FoldView view = fold_view(folds, f);
    std::vector<Probe> probes;
    probes.reserve(view.probe.size());
    for (std::size_t i : view.probe) {
      const auto& p = corpus.pairs()[i];
      probes.push_back({"P:" + std::to_string(i), p.clinic_text, p.masterlist_id, i});
    }
    report.per_fold.push_back(evaluate_fold(corpus, view.gallery, probes, config, &cache));
  }
  aggregate(report);
  return report;
}

nlohmann::json to_json(const EvalReport& report) {
  const auto row_json = [](const AccuracyRow& row) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t c = 0; c < kAccuracyCutoffs.size(); ++c) j["acc@" + std::to_string(kAccuracyCutoffs[c])] = row[c];
    return j;
  };
  nlohmann::json j;
  j["mode"] = to_string(report.mode);
  j["scenario"] = to_string(report.scenario);
  j["dedup"] = report.dedup;
  auto& folds = j["per_fold"] = nlohmann::json::array();
  for (std::size_t f = 0; f < report.per_fold.size(); ++f) {
    auto fj = row_json(report.per_fold[f].accuracy);
    fj["fold"] = f;
    fj["probes"] = report.per_fold[f].probes;
    fj["skipped"] = report.per_fold[f].skipped;
    folds.push_back(std::move(fj));
  }
  j["mean"] = row_json(report.mean);
  j["std"] = row_json(report.std);
  return j;
}

std::string format_table(std::span<const EvalReport> reports) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-8s %-22s", "mode", "scenario");
  out << buf;
  for (auto k : kAccuracyCutoffs) {
    std::snprintf(buf, sizeof buf, " %15s", ("Acc@" + std::to_string(k)).c_str());
    out << buf;
  }
  out << '\n';
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-8s %-22s", to_string(r.mode), to_string(r.scenario));
    out << buf;
    for (std::size_t c = 0; c < kAccuracyCutoffs.size(); ++c) {
      std::snprintf(buf, sizeof buf, " %7.2f ± %5.2f", 100.0 * r.mean[c], 100.0 * r.std[c]);
      out << buf;
    }
    if (!r.dedup) out << "  (no dedup)";
    out << '\n';
  }
  return out.str();
}

}  // namespace medmatch
