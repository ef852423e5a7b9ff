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

#include "medmatch/service.hpp"

#include <algorithm>
#include <chrono>

#include "medmatch/evaluator.hpp"

namespace medmatch {

const char* to_string(ItemStatus status) {
  switch (status) {
    case ItemStatus::pending: return "pending";
    case ItemStatus::mapped: return "mapped";
    case ItemStatus::skipped: return "skipped";
  }
  return "?";
}

ItemStatus parse_item_status(std::string_view name) {
  if (name == "pending") return ItemStatus::pending;
  if (name == "mapped") return ItemStatus::mapped;
  if (name == "skipped") return ItemStatus::skipped;
  throw ServiceError(400, "unknown status '" + std::string(name) + "'");
}

namespace {

nlohmann::json rank_json(const ChosenRank& rank) {
  return rank ? nlohmann::json(*rank) : nlohmann::json("manual");
}

ChosenRank parse_rank(const nlohmann::json& j) {
  if (j.is_string() && j.get<std::string>() == "manual") return std::nullopt;
  return j.get<std::size_t>();
}

}  // namespace

MappingService::MappingService(Corpus base, ServiceConfig config)
    : config_(std::move(config)),
      retriever_(std::make_shared<const RetrieverConfig>(config_.retriever)),
      corpus_(std::move(base)) {}

std::int64_t MappingService::now() const {
  if (config_.clock) return config_.clock();
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::shared_ptr<IndexSnapshot> MappingService::build_snapshot(std::uint64_t version) const {
  auto snap = std::make_shared<IndexSnapshot>();
  snap->version = version;
  snap->index = HybridIndex(retriever_, config_.embedder);
  std::vector<std::pair<DocRef, PreparedText>> docs;
  docs.reserve(corpus_.masterlist().size() + corpus_.pairs().size());
  for (const auto& e : corpus_.masterlist()) {
    DocRef ref = DocRef::entry(e.id);
    docs.emplace_back(ref, snap->index.prepare(ref.key(), e.text));
  }
  for (std::size_t i = 0; i < corpus_.pairs().size(); ++i) {
    const auto& p = corpus_.pairs()[i];
    DocRef ref = DocRef::pair(p.masterlist_id, i);
    docs.emplace_back(ref, snap->index.prepare(ref.key(), p.clinic_text));
  }
  snap->index.build(docs);
  return snap;
}

void MappingService::publish(std::shared_ptr<const IndexSnapshot> next) {
  std::lock_guard lock(publish_);
  current_ = std::move(next);
}

std::shared_ptr<const IndexSnapshot> MappingService::snapshot() const {
  std::lock_guard lock(publish_);
  return current_;
}

bool MappingService::ready() const { return started_.load(); }

void MappingService::start() {
  std::lock_guard writer(writer_);
  if (started_) return;
  publish(build_snapshot(1));
  if (config_.log_path.empty()) {
    started_ = true;
    return;
  }

  if (std::filesystem::exists(config_.log_path)) {
    std::ifstream in(config_.log_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        apply(nlohmann::json::parse(line), /*replaying=*/true);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(config_.log_path.string(), line_no, e.what());
      }
    }
  }
  log_.open(config_.log_path, std::ios::app);
  if (!log_) throw DataError("cannot open review log " + config_.log_path.string());
  started_ = true;
}

void MappingService::append_log(const nlohmann::json& event) {
  if (!log_.is_open()) return;
  log_ << event.dump() << '\n';
  log_.flush();
  if (!log_) throw Error("failed to append to review log");
}

ReviewItem& MappingService::find_item(const std::string& item_id) {
  auto it = item_index_.find(item_id);
  if (it == item_index_.end()) throw ServiceError(404, "unknown item '" + item_id + "'");
  return items_[it->second];
}

void MappingService::apply(const nlohmann::json& event, bool replaying) {
  const auto type = event.at("type").get<std::string>();
  if (type == "enqueue") {
    ReviewItem item{event.at("item_id").get<std::string>(), event.at("clinic_text").get<std::string>(),
                    ItemStatus::pending, std::nullopt};
    std::unique_lock lock(state_);
    const std::uint64_t n = std::stoull(item.item_id.substr(1));
    next_item_ = std::max(next_item_, n + 1);
    item_index_.emplace(item.item_id, items_.size());
    items_.push_back(std::move(item));
  } else if (type == "skip") {
    std::unique_lock lock(state_);
    find_item(event.at("item_id").get<std::string>()).status = ItemStatus::skipped;
  } else if (type == "mapping") {
    MappingPair pair{event.at("clinic_text").get<std::string>(), event.at("masterlist_id").get<std::string>(),
                     PairSource::reviewer, std::nullopt};
    Decision decision{pair.masterlist_id, parse_rank(event.at("chosen_rank")), event.at("reviewer").get<std::string>(),
                      event.at("ts").get<std::int64_t>()};
    std::optional<std::size_t> index;
    {
      std::unique_lock lock(state_);
      auto& item = find_item(event.at("item_id").get<std::string>());
      item.status = ItemStatus::mapped;
      item.decision = std::move(decision);
      index = corpus_.add_pair(pair);
    }
    if (index) {
      const auto current = snapshot();
      auto next = std::make_shared<IndexSnapshot>(*current);
      next->version = current->version + 1;
      const DocRef ref = DocRef::pair(pair.masterlist_id, *index);
      next->index.append(ref, next->index.prepare(ref.key(), pair.clinic_text));
      publish(std::move(next));
    }
    ++accepts_since_rebuild_;
    if (!replaying && config_.rebuild_every && accepts_since_rebuild_ >= config_.rebuild_every) {
      const nlohmann::json rebuild_event{{"type", "rebuild"}, {"ts", now()}};
      append_log(rebuild_event);
      apply(rebuild_event, false);
    }
  } else if (type == "rebuild") {
    publish(build_snapshot(snapshot()->version + 1));
    accepts_since_rebuild_ = 0;
  } else {
    throw DataError("unknown review log event '" + type + "'");
  }
}

SuggestResponse MappingService::suggest(std::string_view query, std::size_t k, RetrievalMode mode) const {
  if (!ready()) throw ServiceError(503, "index not built yet");
  const auto snap = snapshot();
  if (k < 1 || k > 100) throw ServiceError(400, "k must lie in [1, 100]");
  if (mode != RetrievalMode::sparse && !config_.embedder) {
    throw ServiceError(400, std::string("mode '") + to_string(mode) + "' needs a dense embedder");
  }
  const PreparedText prepared = snap->index.prepare("", query);
  if (mode == RetrievalMode::sparse ? prepared.tokens.empty() : !prepared.embedding) {
    throw ServiceError(422, "query cannot be embedded");
  }

  const RankedList ranked = snap->index.retrieve(prepared, mode, std::max(k, retriever_->depth));
  auto resolved = resolve_to_masterlist(ranked);
  if (resolved.size() > k) resolved.resize(k);

  SuggestResponse out;
  out.mode = mode;
  out.snapshot_version = snap->version;
  for (std::size_t i = 0; i < resolved.size(); ++i) {
    // The masterlist never changes after construction.
    const auto* entry = corpus_.find_entry(resolved[i].masterlist_id);
    out.suggestions.push_back({resolved[i].masterlist_id, entry ? entry->text : "", resolved[i].score, i + 1});
  }
  return out;
}

std::vector<ReviewItem> MappingService::enqueue(const std::vector<std::string>& texts) {
  std::lock_guard writer(writer_);
  if (!ready()) throw ServiceError(503, "service is starting");
  for (const auto& t : texts) {
    if (t.find_first_not_of(" \t\r\n") == std::string::npos) throw ServiceError(400, "empty clinic text");
    if (!valid_utf8(t)) throw ServiceError(400, "clinic text is not valid UTF-8");
  }
  std::vector<ReviewItem> created;
  for (const auto& t : texts) {
    const nlohmann::json event{
        {"type", "enqueue"}, {"item_id", "I" + std::to_string(next_item_)}, {"clinic_text", t}, {"ts", now()}};
    append_log(event);
    apply(event, false);
    std::shared_lock lock(state_);
    created.push_back(items_.back());
  }
  return created;
}

std::vector<ReviewItem> MappingService::queue(std::optional<ItemStatus> status, std::size_t limit) const {
  std::shared_lock lock(state_);
  std::vector<ReviewItem> out;
  for (const auto& item : items_) {
    if (out.size() >= limit) break;
    if (!status || item.status == *status) out.push_back(item);
  }
  return out;
}

std::optional<ReviewItem> MappingService::item(const std::string& item_id) const {
  std::shared_lock lock(state_);
  auto it = item_index_.find(item_id);
  if (it == item_index_.end()) return std::nullopt;
  return items_[it->second];
}

ReviewItem MappingService::accept_mapping(const std::string& item_id, const std::string& masterlist_id,
                                          ChosenRank chosen_rank, const std::string& reviewer) {
  std::lock_guard writer(writer_);
  if (!ready()) throw ServiceError(503, "index not built yet");
  std::string clinic_text;
  {
    std::shared_lock lock(state_);
    auto it = item_index_.find(item_id);
    if (it == item_index_.end()) throw ServiceError(404, "unknown item '" + item_id + "'");
    const auto& item = items_[it->second];
    if (item.status != ItemStatus::pending) {
      throw ServiceError(409, "item '" + item_id + "' is already " + to_string(item.status));
    }
    if (!corpus_.find_entry(masterlist_id)) throw ServiceError(404, "unknown masterlist id '" + masterlist_id + "'");
    clinic_text = item.clinic_text;
  }
  if (chosen_rank && *chosen_rank < 1) throw ServiceError(400, "chosen_rank must be >= 1 or \"manual\"");

  const nlohmann::json event{{"type", "mapping"},         {"item_id", item_id},
                             {"clinic_text", clinic_text}, {"masterlist_id", masterlist_id},
                             {"chosen_rank", rank_json(chosen_rank)}, {"reviewer", reviewer},
                             {"ts", now()}};
  append_log(event);
  apply(event, false);
  return *item(item_id);
}

ReviewItem MappingService::skip(const std::string& item_id) {
  std::lock_guard writer(writer_);
  if (!ready()) throw ServiceError(503, "service is starting");
  {
    std::shared_lock lock(state_);
    auto it = item_index_.find(item_id);
    if (it == item_index_.end()) throw ServiceError(404, "unknown item '" + item_id + "'");
    if (items_[it->second].status != ItemStatus::pending) {
      throw ServiceError(409, "item '" + item_id + "' is already " + to_string(items_[it->second].status));
    }
  }
  const nlohmann::json event{{"type", "skip"}, {"item_id", item_id}, {"ts", now()}};
  append_log(event);
  apply(event, false);
  return *item(item_id);
}

std::uint64_t MappingService::rebuild() {
  std::lock_guard writer(writer_);
  if (!ready()) throw ServiceError(503, "index not built yet");
  const nlohmann::json event{{"type", "rebuild"}, {"ts", now()}};
  append_log(event);
  apply(event, false);
  return snapshot()->version;
}

ReviewStats MappingService::stats() const {
  std::shared_lock lock(state_);
  ReviewStats s;
  std::size_t rank1 = 0, rank2 = 0, manual = 0;
  std::optional<std::int64_t> first, last;
  for (const auto& item : items_) {
    if (item.status == ItemStatus::pending) ++s.pending;
    if (item.status == ItemStatus::skipped) ++s.skipped;
    if (item.status != ItemStatus::mapped) continue;
    ++s.reviewed;
    const auto& d = *item.decision;
    if (!d.chosen_rank) {
      ++manual;
    } else {
      rank1 += *d.chosen_rank == 1;
      rank2 += *d.chosen_rank <= 2;
    }
    first = first ? std::min(*first, d.timestamp_ms) : d.timestamp_ms;
    last = last ? std::max(*last, d.timestamp_ms) : d.timestamp_ms;
  }
  if (s.reviewed > 0) {
    const auto n = static_cast<double>(s.reviewed);
    s.acc_at_1 = static_cast<double>(rank1) / n;
    s.acc_at_2 = static_cast<double>(rank2) / n;
    s.manual = static_cast<double>(manual) / n;
  }
  if (s.reviewed > 1 && *last > *first) {
    s.throughput_per_min = static_cast<double>(s.reviewed - 1) / (static_cast<double>(*last - *first) / 60000.0);
  }
  return s;
}

std::optional<MasterlistEntry> MappingService::masterlist_entry(const std::string& id) const {
  const auto* e = corpus_.find_entry(id);
  if (!e) return std::nullopt;
  return *e;
}

std::size_t MappingService::pair_count() const {
  std::shared_lock lock(state_);
  return corpus_.pairs().size();
}

std::vector<MappingPair> MappingService::accepted_pairs() const {
  std::shared_lock lock(state_);
  std::vector<MappingPair> out;
  for (const auto& p : corpus_.pairs()) {
    if (p.source == PairSource::reviewer) out.push_back(p);
  }
  return out;
}

nlohmann::json to_json(const ReviewItem& item) {
  nlohmann::json j{{"item_id", item.item_id}, {"clinic_text", item.clinic_text}, {"status", to_string(item.status)}};
  if (item.decision) {
    j["decision"] = {{"masterlist_id", item.decision->masterlist_id},
                     {"chosen_rank", rank_json(item.decision->chosen_rank)},
                     {"reviewer", item.decision->reviewer},
                     {"timestamp_ms", item.decision->timestamp_ms}};
  } else {
    j["decision"] = nullptr;
  }
  return j;
}

nlohmann::json to_json(const SuggestResponse& response) {
  nlohmann::json j{{"mode", to_string(response.mode)}, {"snapshot_version", response.snapshot_version}};
  auto& list = j["suggestions"] = nlohmann::json::array();
  for (const auto& s : response.suggestions) {
    list.push_back({{"masterlist_id", s.masterlist_id}, {"text", s.text}, {"score", s.score}, {"rank", s.rank}});
  }
  return j;
}

nlohmann::json to_json(const ReviewStats& stats) {
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"reviewed", stats.reviewed},
          {"skipped", stats.skipped},
          {"pending", stats.pending},
          {"acc@1", opt(stats.acc_at_1)},
          {"acc@2", opt(stats.acc_at_2)},
          {"manual", opt(stats.manual)},
          {"throughput", opt(stats.throughput_per_min)}};
}

}  // namespace medmatch
