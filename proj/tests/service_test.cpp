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

#include <atomic>
#include <fstream>
#include <map>
#include <thread>

#include <gtest/gtest.h>

#include "medmatch/evaluator.hpp"

#include "service_fixtures.hpp"

using namespace medmatch;
using namespace medmatch::fixtures;

namespace {

Corpus base_corpus() { return make_synthetic_corpus({30, 3, 9}); }

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 0;
}

std::size_t log_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST(Service, UnavailableBeforeStart) {
  MappingService service(base_corpus(), service_config({}));
  EXPECT_FALSE(service.ready());
  EXPECT_EQ(status_of([&] { service.suggest("ecografie", 3, RetrievalMode::hybrid); }), 503);
  EXPECT_EQ(status_of([&] { service.enqueue({"ecografie"}); }), 503);
  service.start();
  EXPECT_TRUE(service.ready());
  EXPECT_EQ(service.snapshot()->version, 1u);
}

TEST(Service, SuggestEntryTextAtRankOne) {
  const Corpus base = base_corpus();
  MappingService service(base, service_config({}));
  service.start();
  for (auto mode : {RetrievalMode::sparse, RetrievalMode::dense, RetrievalMode::hybrid}) {
    for (std::size_t i = 0; i < 10; ++i) {
      const auto& e = base.masterlist()[i];
      const auto r = service.suggest(e.text, 3, mode);
      ASSERT_FALSE(r.suggestions.empty());
      EXPECT_EQ(r.suggestions[0].masterlist_id, e.id) << to_string(mode) << ' ' << e.text;
      EXPECT_EQ(r.suggestions[0].text, e.text);
      EXPECT_EQ(r.suggestions[0].rank, 1u);
      EXPECT_EQ(r.mode, mode);
      EXPECT_EQ(r.snapshot_version, 1u);
    }
  }
}

TEST(Service, SmallerKIsPrefix) {
  const Corpus base = base_corpus();
  MappingService service(base, service_config({}));
  service.start();
  for (const auto& p : base.pairs()) {
    for (auto mode : {RetrievalMode::sparse, RetrievalMode::dense, RetrievalMode::hybrid}) {
      const auto one = service.suggest(p.clinic_text, 1, mode).suggestions;
      const auto five = service.suggest(p.clinic_text, 5, mode).suggestions;
      ASSERT_LE(one.size(), 1u);
      ASSERT_LE(five.size(), 5u);
      std::set<std::string> ids;
      for (const auto& s : five) EXPECT_TRUE(ids.insert(s.masterlist_id).second);
      if (!one.empty()) {
        EXPECT_EQ(one[0].masterlist_id, five[0].masterlist_id);
        EXPECT_EQ(one[0].score, five[0].score);
      }
    }
  }
}

TEST(Service, RejectsBadQueries) {
  MappingService service(base_corpus(), service_config({}));
  service.start();
  EXPECT_EQ(status_of([&] { service.suggest("ecografie", 0, RetrievalMode::sparse); }), 400);
  EXPECT_EQ(status_of([&] { service.suggest("ecografie", 101, RetrievalMode::sparse); }), 400);
  EXPECT_EQ(status_of([&] { service.suggest("ecografie", 100, RetrievalMode::sparse); }), 0);
  EXPECT_EQ(status_of([&] { service.suggest("!!! ?", 3, RetrievalMode::dense); }), 422);
  EXPECT_EQ(status_of([&] { service.suggest("si de la", 3, RetrievalMode::sparse); }), 422);

  auto config = service_config({});
  config.embedder = nullptr;
  MappingService sparse_only(base_corpus(), config);
  sparse_only.start();
  EXPECT_EQ(status_of([&] { sparse_only.suggest("ecografie", 3, RetrievalMode::dense); }), 400);
}

TEST(Service, AcceptedTextComesBackFirst) {
  const Corpus base = base_corpus();
  MappingService service(base, service_config({}));
  service.start();
  const std::string target = base.masterlist()[3].id;
  const auto items = service.enqueue({"x"});
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0].status, ItemStatus::pending);
  const auto updated = service.accept_mapping(items[0].item_id, target, 2, "dr");
  EXPECT_EQ(updated.status, ItemStatus::mapped);
  ASSERT_TRUE(updated.decision);
  EXPECT_EQ(updated.decision->chosen_rank, ChosenRank{2});
  EXPECT_EQ(service.snapshot()->version, 2u);
  EXPECT_EQ(service.pair_count(), base.pairs().size() + 1);
  for (auto mode : {RetrievalMode::sparse, RetrievalMode::dense, RetrievalMode::hybrid}) {
    const auto r = service.suggest("x", 3, mode);
    ASSERT_FALSE(r.suggestions.empty());
    EXPECT_EQ(r.suggestions[0].masterlist_id, target) << to_string(mode);
    EXPECT_EQ(r.snapshot_version, 2u);
  }
  ASSERT_EQ(service.accepted_pairs().size(), 1u);
  EXPECT_EQ(service.accepted_pairs()[0].source, PairSource::reviewer);
}

TEST(Service, DecidedItemIsGuarded) {
  const auto dir = fresh_dir("guard");
  const Corpus base = base_corpus();
  MappingService service(base, service_config(dir / "log.jsonl"));
  service.start();
  const auto items = service.enqueue({"ecografie renala", "rx torace"});
  const std::string id = base.masterlist()[0].id;
  service.accept_mapping(items[0].item_id, id, 1, "dr");
  service.skip(items[1].item_id);

  const auto stats = to_json(service.stats()).dump();
  const auto version = service.snapshot()->version;
  const auto lines = log_lines(dir / "log.jsonl");
  EXPECT_EQ(status_of([&] { service.accept_mapping(items[0].item_id, id, 1, "dr"); }), 409);
  EXPECT_EQ(status_of([&] { service.accept_mapping(items[1].item_id, id, 1, "dr"); }), 409);
  EXPECT_EQ(status_of([&] { service.skip(items[0].item_id); }), 409);
  EXPECT_EQ(status_of([&] { service.accept_mapping("I999", id, 1, "dr"); }), 404);
  EXPECT_EQ(status_of([&] { service.skip("nope"); }), 404);
  const auto fresh = service.enqueue({"ekg"});
  EXPECT_EQ(status_of([&] { service.accept_mapping(fresh[0].item_id, "no-such-id", 1, "dr"); }), 404);
  EXPECT_EQ(status_of([&] { service.accept_mapping(fresh[0].item_id, id, 0, "dr"); }), 400);
  EXPECT_EQ(status_of([&] { service.enqueue({"  "}); }), 400);

  EXPECT_EQ(service.item(fresh[0].item_id)->status, ItemStatus::pending);
  EXPECT_EQ(service.snapshot()->version, version);
  EXPECT_EQ(log_lines(dir / "log.jsonl"), lines + 1);
  auto after = service.stats();
  after.pending -= 1;
  EXPECT_EQ(to_json(after).dump(), stats);
  std::filesystem::remove_all(dir);
}

TEST(Service, StatsCountDecisions) {
  const Corpus base = base_corpus();
  MappingService service(base, service_config({}));
  service.start();
  const auto empty = service.stats();
  EXPECT_EQ(empty.reviewed, 0u);
  EXPECT_FALSE(empty.acc_at_1);
  EXPECT_FALSE(empty.acc_at_2);
  EXPECT_FALSE(empty.manual);
  EXPECT_FALSE(empty.throughput_per_min);
  EXPECT_TRUE(to_json(empty)["acc@1"].is_null());

  const auto items = service.enqueue({"a1", "a2", "a3", "a4", "a5", "a6"});
  EXPECT_EQ(service.stats().pending, 6u);
  const std::vector<ChosenRank> ranks{1, 1, 2, std::nullopt};
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    service.accept_mapping(items[i].item_id, base.masterlist()[i].id, ranks[i], "dr");
  }
  service.skip(items[4].item_id);
  const auto s = service.stats();
  EXPECT_EQ(s.reviewed, 4u);
  EXPECT_EQ(s.skipped, 1u);
  EXPECT_EQ(s.pending, 1u);
  EXPECT_DOUBLE_EQ(*s.acc_at_1, 0.5);
  EXPECT_DOUBLE_EQ(*s.acc_at_2, 0.75);
  EXPECT_DOUBLE_EQ(*s.manual, 0.25);
  EXPECT_LE(*s.acc_at_1, *s.acc_at_2);
  // The test clock advances one second per event; the four accepts
  // are separated by three clock ticks each way, 3 seconds in total.
  EXPECT_DOUBLE_EQ(*s.throughput_per_min, 3.0 / (3.0 / 60.0));
}

TEST(Service, QueueConservation) {
  const Corpus base = base_corpus();
  MappingService service(base, service_config({}));
  service.start();
  std::mt19937_64 rng(4);
  std::size_t ingested = 0;
  for (int round = 0; round < 40; ++round) {
    const auto before = service.queue(std::nullopt, 100000).size();
    random_session(service, base, rng, 1);
    ingested = service.queue(std::nullopt, 100000).size();
    EXPECT_GE(ingested, before);
    const auto s = service.stats();
    EXPECT_EQ(s.pending + s.reviewed + s.skipped, ingested);
    EXPECT_EQ(service.queue(ItemStatus::pending, 100000).size(), s.pending);
    EXPECT_EQ(service.queue(ItemStatus::mapped, 100000).size(), s.reviewed);
  }
  EXPECT_GT(ingested, 0u);
  EXPECT_EQ(service.queue(std::nullopt, 3).size(), 3u);
}

TEST(Service, RebuildBumpsVersionAndRefreshesStatistics) {
  const Corpus base = base_corpus();
  MappingService service(base, service_config({}, 3));
  service.start();
  const double avgdl = service.snapshot()->index.sparse().avgdl();
  const auto items = service.enqueue({"o procedura foarte lunga cu multe cuvinte noi", "b", "c", "d"});
  service.accept_mapping(items[0].item_id, base.masterlist()[0].id, 1, "dr");
  EXPECT_EQ(service.snapshot()->index.sparse().avgdl(), avgdl);
  service.accept_mapping(items[1].item_id, base.masterlist()[0].id, 1, "dr");
  EXPECT_EQ(service.snapshot()->version, 3u);
  service.accept_mapping(items[2].item_id, base.masterlist()[0].id, 1, "dr");
  // Third accept: append (v4) then the automatic rebuild (v5).
  EXPECT_EQ(service.snapshot()->version, 5u);
  EXPECT_NE(service.snapshot()->index.sparse().avgdl(), avgdl);
  EXPECT_EQ(service.rebuild(), 6u);
  EXPECT_EQ(service.snapshot()->index.sparse().size(), base.masterlist().size() + base.pairs().size() + 3);
}

TEST(Service, DuplicateAcceptDoesNotGrowIndex) {
  const Corpus base = base_corpus();
  MappingService service(base, service_config({}));
  service.start();
  const auto& p = base.pairs()[0];
  const auto items = service.enqueue({p.clinic_text});
  service.accept_mapping(items[0].item_id, p.masterlist_id, 1, "dr");
  EXPECT_EQ(service.snapshot()->version, 1u);
  EXPECT_EQ(service.pair_count(), base.pairs().size());
  EXPECT_EQ(service.item(items[0].item_id)->status, ItemStatus::mapped);
}

TEST(Service, ReplayReconstructsState) {
  const Corpus base = base_corpus();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto dir = fresh_dir("replay");
    const auto log = dir / "review_log.jsonl";
    std::string live_index, live_items, live_stats;
    std::uint64_t live_version = 0;
    {
      MappingService live(base, service_config(log, 7));
      live.start();
      std::mt19937_64 rng(seed);
      random_session(live, base, rng, 120);
      live_index = describe_index(live.snapshot()->index);
      live_version = live.snapshot()->version;
      for (const auto& i : live.queue(std::nullopt, 100000)) live_items += to_json(i).dump() + "\n";
      live_stats = to_json(live.stats()).dump();
    }
    MappingService replayed(base, service_config(log, 7));
    replayed.start();
    EXPECT_EQ(replayed.snapshot()->version, live_version);
    EXPECT_EQ(describe_index(replayed.snapshot()->index), live_index);
    std::string items;
    for (const auto& i : replayed.queue(std::nullopt, 100000)) items += to_json(i).dump() + "\n";
    EXPECT_EQ(items, live_items);
    EXPECT_EQ(to_json(replayed.stats()).dump(), live_stats);

    // New items continue the id sequence after a restart.
    const auto before = replayed.queue(std::nullopt, 100000).size();
    const auto more = replayed.enqueue({"dupa repornire"});
    EXPECT_EQ(replayed.item(more[0].item_id)->clinic_text, "dupa repornire");
    EXPECT_EQ(replayed.queue(std::nullopt, 100000).size(), before + 1);
    std::filesystem::remove_all(dir);
  }
}

TEST(Service, LogIsJsonLines) {
  const auto dir = fresh_dir("log");
  const Corpus base = base_corpus();
  {
    MappingService service(base, service_config(dir / "log.jsonl"));
    service.start();
    const auto items = service.enqueue({"ecografie", "rx"});
    service.accept_mapping(items[0].item_id, base.masterlist()[1].id, std::nullopt, "dr");
    service.skip(items[1].item_id);
    service.rebuild();
  }
  std::ifstream in(dir / "log.jsonl");
  std::vector<std::string> types;
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    types.push_back(j.at("type").get<std::string>());
    if (types.back() == "mapping") {
      EXPECT_EQ(j["chosen_rank"], "manual");
      EXPECT_EQ(j["masterlist_id"], base.masterlist()[1].id);
      EXPECT_EQ(j["clinic_text"], "ecografie");
    }
  }
  EXPECT_EQ(types, (std::vector<std::string>{"enqueue", "enqueue", "mapping", "skip", "rebuild"}));

  std::ofstream(dir / "log.jsonl", std::ios::app) << "{not json\n";
  MappingService broken(base, service_config(dir / "log.jsonl"));
  EXPECT_THROW(broken.start(), ParseError);
  std::filesystem::remove_all(dir);
}

TEST(Service, ReadersSeeWholeSnapshots) {
  const Corpus base = base_corpus();
  MappingService service(base, service_config({}));
  service.start();
  std::map<std::uint64_t, std::shared_ptr<const IndexSnapshot>> versions{{1, service.snapshot()}};
  std::mutex versions_mutex;
  const std::vector<std::string> queries{"ecografie", "x", "rx torace", base.pairs()[2].clinic_text};

  std::atomic<bool> done{false};
  std::vector<std::vector<SuggestResponse>> seen(3);
  std::vector<std::thread> readers;
  for (std::size_t t = 0; t < seen.size(); ++t) {
    readers.emplace_back([&, t] {
      std::size_t i = 0;
      while (!done) seen[t].push_back(service.suggest(queries[i++ % queries.size()], 5, RetrievalMode::hybrid));
    });
  }
  const auto items = service.enqueue(std::vector<std::string>(30, "x"));
  for (std::size_t i = 0; i < items.size(); ++i) {
    service.accept_mapping(items[i].item_id, base.masterlist()[i].id, 1, "dr");
    std::lock_guard lock(versions_mutex);
    versions[service.snapshot()->version] = service.snapshot();
  }
  done = true;
  for (auto& r : readers) r.join();

  std::size_t checked = 0;
  for (std::size_t t = 0; t < seen.size(); ++t) {
    for (std::size_t i = 0; i < seen[t].size(); ++i) {
      const auto& response = seen[t][i];
      ASSERT_TRUE(versions.count(response.snapshot_version));
      const auto& index = versions[response.snapshot_version]->index;
      const auto query = index.prepare("", queries[i % queries.size()]);
      auto expected = resolve_to_masterlist(index.retrieve(query, RetrievalMode::hybrid, 100));
      expected.resize(std::min<std::size_t>(5, expected.size()));
      ASSERT_EQ(response.suggestions.size(), expected.size());
      for (std::size_t r = 0; r < expected.size(); ++r) {
        EXPECT_EQ(response.suggestions[r].masterlist_id, expected[r].masterlist_id);
        EXPECT_EQ(response.suggestions[r].score, expected[r].score);
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(Service, JsonShapes) {
  ReviewItem item{"I7", "ecografie", ItemStatus::mapped, Decision{"M1", std::nullopt, "dr", 5}};
  const auto j = to_json(item);
  EXPECT_EQ(j["item_id"], "I7");
  EXPECT_EQ(j["status"], "mapped");
  EXPECT_EQ(j["decision"]["chosen_rank"], "manual");
  item.status = ItemStatus::pending;
  item.decision.reset();
  EXPECT_TRUE(to_json(item)["decision"].is_null());
  EXPECT_EQ(parse_item_status("skipped"), ItemStatus::skipped);
  EXPECT_EQ(status_of([] { parse_item_status("done"); }), 400);
}
