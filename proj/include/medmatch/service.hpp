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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

#include "medmatch/corpus.hpp"
#include "medmatch/error.hpp"
#include "medmatch/retrieval.hpp"

namespace medmatch {

/// Failure with an HTTP-style status: 400, 404, 409, 422 or 503.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

enum class ItemStatus { pending, mapped, skipped };

const char* to_string(ItemStatus status);
ItemStatus parse_item_status(std::string_view name);

/// Rank of the accepted suggestion (1-based), or nullopt for a manual pick.
using ChosenRank = std::optional<std::size_t>;

struct Decision {
  std::string masterlist_id;
  ChosenRank chosen_rank;
  std::string reviewer;
  std::int64_t timestamp_ms = 0;
};

struct ReviewItem {
  std::string item_id;
  std::string clinic_text;
  ItemStatus status = ItemStatus::pending;
  std::optional<Decision> decision;
};

struct Suggestion {
  std::string masterlist_id;
  std::string text;
  double score = 0.0;
  std::size_t rank = 0;
};

struct SuggestResponse {
  RetrievalMode mode = RetrievalMode::hybrid;
  std::uint64_t snapshot_version = 0;
  std::vector<Suggestion> suggestions;
};

struct ReviewStats {
  std::size_t reviewed = 0;  // mapped items
  std::size_t skipped = 0;
  std::size_t pending = 0;
  std::optional<double> acc_at_1;
  std::optional<double> acc_at_2;
  std::optional<double> manual;
  std::optional<double> throughput_per_min;
};

struct ServiceConfig {
  RetrieverConfig retriever;
  std::shared_ptr<const Embedder> embedder;  // null: sparse only
  std::size_t rebuild_every = 1000;          // accepts between full rebuilds; 0 disables
  std::filesystem::path log_path;            // empty: no persistence
  std::function<std::int64_t()> clock;       // unix milliseconds; defaults to the system clock
};

/// One immutable index version. Readers hold a shared_ptr for the whole
/// query, so they never observe a partial update.
struct IndexSnapshot {
  std::uint64_t version = 0;
  HybridIndex index;
};

/// Live mapping service state: base corpus, reviewer feedback and the
/// published index snapshot.
///
/// Mutations (enqueue, accept, skip, rebuild) are serialized by one writer
/// lock and appended to a JSON Lines log before they take effect in memory.
/// Accepted mappings are appended to a copy of the current index, which is
/// then swapped in; BM25 average length stays as of the last rebuild.
/// Starting from the same base corpus, replaying the log rebuilds the same
/// index contents, versions included.
class MappingService {
 public:
  MappingService(Corpus base, ServiceConfig config);

  /// Builds the first snapshot and replays the log if there is one.
  /// Until this returns, suggest() fails with 503.
  void start();
  bool ready() const;

  SuggestResponse suggest(std::string_view query, std::size_t k, RetrievalMode mode) const;

  std::vector<ReviewItem> enqueue(const std::vector<std::string>& texts);
  std::vector<ReviewItem> queue(std::optional<ItemStatus> status, std::size_t limit) const;
  std::optional<ReviewItem> item(const std::string& item_id) const;

  ReviewItem accept_mapping(const std::string& item_id, const std::string& masterlist_id, ChosenRank chosen_rank,
                            const std::string& reviewer);
  ReviewItem skip(const std::string& item_id);

  /// Full rebuild from base corpus plus accepted pairs; returns the new version.
  std::uint64_t rebuild();

  ReviewStats stats() const;
  std::optional<MasterlistEntry> masterlist_entry(const std::string& id) const;

  std::shared_ptr<const IndexSnapshot> snapshot() const;
  std::size_t pair_count() const;
  std::vector<MappingPair> accepted_pairs() const;

 private:
  void apply(const nlohmann::json& event, bool replaying);
  void append_log(const nlohmann::json& event);
  void publish(std::shared_ptr<const IndexSnapshot> next);
  std::shared_ptr<IndexSnapshot> build_snapshot(std::uint64_t version) const;
  ReviewItem& find_item(const std::string& item_id);
  std::int64_t now() const;

  ServiceConfig config_;
  std::shared_ptr<const RetrieverConfig> retriever_;

  mutable std::mutex writer_;        // serializes mutations
  mutable std::shared_mutex state_;  // guards corpus_ and items_ for readers
  Corpus corpus_;
  std::vector<ReviewItem> items_;
  std::unordered_map<std::string, std::size_t> item_index_;
  std::uint64_t next_item_ = 1;
  std::size_t accepts_since_rebuild_ = 0;
  std::ofstream log_;

  std::atomic<bool> started_{false};
  mutable std::mutex publish_;  // held only to copy or swap the pointer
  std::shared_ptr<const IndexSnapshot> current_;
};

nlohmann::json to_json(const ReviewItem& item);
nlohmann::json to_json(const SuggestResponse& response);
nlohmann::json to_json(const ReviewStats& stats);

}  // namespace medmatch
