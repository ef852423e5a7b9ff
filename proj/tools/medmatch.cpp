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

// medmatch command-line entry point.

#include <signal.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "medmatch/corpus.hpp"
#include "medmatch/embedder.hpp"
#include "medmatch/error.hpp"
#include "medmatch/evaluator.hpp"
#include "medmatch/http_api.hpp"
#include "medmatch/metric_trainer.hpp"
#include "medmatch/retrieval.hpp"
#include "medmatch/service.hpp"
#include "medmatch/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace medmatch {
namespace {

// Usage errors exit 1, data errors 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json default_settings() {
  return {
      {"masterlist", ""},     {"pairs", ""},         {"data_dir", ""},     {"seed", 0},
      {"folds", 5},           {"folds_file", ""},     {"mode", ""},         {"scenario", ""},
      {"k", 5},               {"q", ""},              {"fusion_k", 60.0},   {"k1", 1.2},
      {"b", 0.75},            {"depth", 100},         {"lang_dir", ""},     {"embedder", "hash"},
      {"dim", 256},           {"ngram_min", 3},       {"ngram_max", 5},     {"hash_salt", 0},
      {"embeddings", ""},     {"adapter", ""},        {"epochs", 30},       {"batch_size", 32},
      {"lr", 1.0},            {"warmup", 0.1},        {"scale", 20.0},      {"d_out", 0},
      {"out", ""},            {"n", 12836},           {"index_size", 100000}, {"bind", ""},
      {"rebuild_every", 1000},
  };
}

// Converts a flag value to the JSON type of its default.
json typed_value(const std::string& key, const std::string& raw, const json& like) {
  try {
    std::size_t used = 0;
    if (like.is_string()) return raw;
    if (like.is_number_float()) {
      const double v = std::stod(raw, &used);
      if (used == raw.size()) return v;
    } else if (like.is_number_integer()) {
      if (!raw.empty() && raw[0] != '-') {
        const unsigned long long v = std::stoull(raw, &used);
        if (used == raw.size()) return v;
      }
    }
  } catch (const std::exception&) {
  }
  throw UsageError("--" + key + ": bad value '" + raw + "'");
}

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

class Settings {
 public:
  Settings(CLI::App* app, std::vector<std::string> keys) : app_(app), keys_(std::move(keys)) {
    const json defaults = default_settings();
    app_->add_option("--config", config_path_, "JSON settings file; flags override it");
    app_->add_flag("--json", json_, "Machine-readable output");
    for (const auto& key : keys_) {
      const json& d = defaults.at(key);
      std::string help = "default: " + (d.is_string() ? d.get<std::string>() : d.dump());
      app_->add_option(flag_name(key), raw_[key], help);
    }
  }

  json resolve() const {
    json values = json::object();
    const json defaults = default_settings();
    for (const auto& key : keys_) values[key] = defaults.at(key);
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw DataError("cannot open config " + config_path_);
      json file;
      try {
        file = json::parse(in);
      } catch (const json::exception& e) {
        throw UsageError("config " + config_path_ + ": " + e.what());
      }
      if (!file.is_object()) throw UsageError("config " + config_path_ + ": expected a JSON object");
      for (const auto& [key, value] : file.items()) {
        if (!values.contains(key)) throw UsageError("config " + config_path_ + ": unknown key '" + key + "'");
        const json& d = values[key];
        const bool ok = (d.is_string() && value.is_string()) ||
                        (d.is_number_float() && value.is_number()) ||
                        (d.is_number_integer() && value.is_number_unsigned());
        if (!ok) throw UsageError("config " + config_path_ + ": bad type for '" + key + "'");
        values[key] = d.is_number_float() ? json(value.get<double>()) : value;
      }
    }
    for (const auto& key : keys_) {
      if (app_->get_option(flag_name(key))->count() > 0) values[key] = typed_value(key, raw_.at(key), values[key]);
    }
    return values;
  }

  bool json_output() const { return json_; }

 private:
  CLI::App* app_;
  std::vector<std::string> keys_;
  std::string config_path_;
  bool json_ = false;
  std::map<std::string, std::string> raw_;
};

const std::vector<std::string> kCorpusKeys{"masterlist", "pairs", "data_dir"};
const std::vector<std::string> kRetrieverKeys{"fusion_k", "k1",        "b",         "depth",     "lang_dir",
                                              "embedder", "dim",       "ngram_min", "ngram_max", "hash_salt",
                                              "embeddings", "adapter"};

std::vector<std::string> join(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::string str(const json& s, const char* key) { return s.at(key).get<std::string>(); }
std::size_t count(const json& s, const char* key) { return s.at(key).get<std::size_t>(); }
double real(const json& s, const char* key) { return s.at(key).get<double>(); }

Corpus load_from(const json& s, IngestReport* report = nullptr) {
  fs::path masterlist = str(s, "masterlist");
  fs::path pairs = str(s, "pairs");
  const fs::path dir = str(s, "data_dir");
  if (!dir.empty()) {
    if (masterlist.empty()) masterlist = dir / "masterlist.csv";
    if (pairs.empty()) pairs = dir / "pairs.csv";
  }
  if (masterlist.empty() || pairs.empty()) throw UsageError("need --masterlist and --pairs (or --data-dir)");
  return load_corpus(masterlist, pairs, report);
}

RetrieverConfig retriever_from(const json& s) {
  RetrieverConfig r;
  const std::string lang = str(s, "lang_dir");
  r.normalizer = lang.empty() ? romanian_pack() : load_language_pack(lang);
  r.bm25.k1 = real(s, "k1");
  r.bm25.b = real(s, "b");
  r.fusion.k = real(s, "fusion_k");
  r.depth = count(s, "depth");
  if (r.depth == 0) throw UsageError("--depth must be positive");
  return r;
}

EmbedderSpec embedder_spec_from(const json& s) {
  EmbedderSpec base;
  const std::string kind = str(s, "embedder");
  if (kind == "hash") {
    base.kind = EmbedderKind::hash_ngram;
    base.hash = {count(s, "dim"), count(s, "ngram_min"), count(s, "ngram_max"), s.at("hash_salt").get<std::uint64_t>()};
    if (base.hash.dim == 0 || base.hash.n_min == 0 || base.hash.n_min > base.hash.n_max) {
      throw UsageError("bad hash embedder dimensions");
    }
  } else if (kind == "file") {
    base.kind = EmbedderKind::file_backed;
    base.dim = count(s, "dim");
    base.embeddings_path = str(s, "embeddings");
    if (base.embeddings_path.empty()) throw UsageError("--embedder file needs --embeddings");
  } else {
    throw UsageError("--embedder must be hash or file");
  }
  const std::string adapter = str(s, "adapter");
  if (adapter.empty()) return base;
  EmbedderSpec adapted;
  adapted.kind = EmbedderKind::adapted;
  adapted.adapter_path = adapter;
  adapted.base = std::make_shared<const EmbedderSpec>(base);
  return adapted;
}

std::vector<RetrievalMode> modes_from(const std::string& name, RetrievalMode fallback, bool allow_all) {
  if (name.empty()) return {fallback};
  if (allow_all && name == "all") return {RetrievalMode::sparse, RetrievalMode::dense, RetrievalMode::hybrid};
  try {
    return {parse_retrieval_mode(name)};
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::vector<Scenario> scenarios_from(const std::string& name, Scenario fallback, bool allow_all) {
  if (name.empty()) return {fallback};
  if (allow_all && name == "all") return {Scenario::masterlist_only, Scenario::masterlist_plus_pairs};
  try {
    return {parse_scenario(name)};
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void print_config(const std::string& command, const json& s) {
  std::cerr << "config " << json{{"command", command}, {"settings", s}}.dump() << '\n';
}

std::ostream& output(const json& s, std::ofstream& file) {
  const std::string out = str(s, "out");
  if (out.empty()) return std::cout;
  file.open(out, std::ios::binary);
  if (!file) throw DataError("cannot write " + out);
  return file;
}

// Subcommands

int cmd_ingest(const json& s, bool as_json) {
  IngestReport report;
  const Corpus corpus = load_from(s, &report);
  const std::string out = str(s, "out");
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream m(fs::path(out) / "masterlist.csv", std::ios::binary);
    std::ofstream p(fs::path(out) / "pairs.csv", std::ios::binary);
    if (!m || !p) throw DataError("cannot write to " + out);
    write_masterlist_csv(m, corpus);
    write_pairs_csv(p, corpus);
  }
  const json result{{"masterlist_rows", report.masterlist_rows},
                    {"pair_rows", report.pair_rows},
                    {"duplicates_merged", report.duplicates_merged},
                    {"entries", corpus.masterlist().size()},
                    {"pairs", corpus.pairs().size()}};
  if (as_json) {
    std::cout << result.dump() << '\n';
  } else {
    for (const auto& [key, value] : result.items()) std::cout << std::left << std::setw(18) << key << value << '\n';
  }
  return 0;
}

int cmd_split(const json& s, bool as_json) {
  const Corpus corpus = load_from(s);
  const std::size_t n_folds = count(s, "folds");
  if (n_folds < 2) throw UsageError("--folds must be at least 2");
  const FoldAssignment folds = split_folds(corpus, n_folds, s.at("seed").get<std::uint64_t>());
  std::ofstream file;
  write_folds_jsonl(output(s, file), folds);
  if (!str(s, "out").empty()) {
    std::vector<std::size_t> sizes(n_folds);
    for (auto f : folds.fold_of_pair) ++sizes[f];
    if (as_json) {
      std::cout << json{{"folds", sizes}}.dump() << '\n';
    } else {
      for (std::size_t f = 0; f < n_folds; ++f) std::cout << "fold " << f << ": " << sizes[f] << " pairs\n";
    }
  }
  return 0;
}

std::vector<std::pair<DocRef, PreparedText>> index_docs(const Corpus& corpus, const HybridIndex& index, Scenario scenario) {
  std::vector<std::pair<DocRef, PreparedText>> docs;
  for (const auto& e : corpus.masterlist()) {
    DocRef ref = DocRef::entry(e.id);
    docs.emplace_back(ref, index.prepare(ref.key(), e.text));
  }
  if (scenario == Scenario::masterlist_plus_pairs) {
    for (std::size_t i = 0; i < corpus.pairs().size(); ++i) {
      DocRef ref = DocRef::pair(corpus.pairs()[i].masterlist_id, i);
      docs.emplace_back(ref, index.prepare(ref.key(), corpus.pairs()[i].clinic_text));
    }
  }
  return docs;
}

int cmd_build_index(const json& s, bool as_json) {
  const Corpus corpus = load_from(s);
  const Scenario scenario = scenarios_from(str(s, "scenario"), Scenario::masterlist_plus_pairs, false).front();
  const auto retriever = std::make_shared<const RetrieverConfig>(retriever_from(s));
  HybridIndex index(retriever, nullptr);
  index.build(index_docs(corpus, index, scenario));
  std::ofstream file;
  if (!str(s, "out").empty()) {
    index.sparse().save(output(s, file));
    if (!file) throw DataError("failed writing " + str(s, "out"));
  }
  const json result{{"documents", index.sparse().size()},
                    {"vocabulary", index.sparse().vocabulary_size()},
                    {"avgdl", index.sparse().avgdl()},
                    {"scenario", to_string(scenario)}};
  if (as_json) {
    std::cout << result.dump() << '\n';
  } else {
    for (const auto& [key, value] : result.items()) std::cout << std::left << std::setw(12) << key << value << '\n';
  }
  return 0;
}

int cmd_search(const json& s, bool as_json) {
  const Corpus corpus = load_from(s);
  const std::string q = str(s, "q");
  if (q.empty()) throw UsageError("--q is required");
  const std::size_t k = count(s, "k");
  if (k < 1 || k > 100) throw UsageError("--k must lie in [1, 100]");
  const RetrievalMode mode = modes_from(str(s, "mode"), RetrievalMode::sparse, false).front();
  const Scenario scenario = scenarios_from(str(s, "scenario"), Scenario::masterlist_plus_pairs, false).front();

  const auto retriever = std::make_shared<const RetrieverConfig>(retriever_from(s));
  std::shared_ptr<const Embedder> embedder;
  if (mode != RetrievalMode::sparse) embedder = make_embedder(embedder_spec_from(s));
  HybridIndex index(retriever, embedder);
  index.build(index_docs(corpus, index, scenario));

  const PreparedText query = index.prepare("", q);
  auto resolved = resolve_to_masterlist(index.retrieve(query, mode, std::max(k, retriever->depth)));
  if (resolved.size() > k) resolved.resize(k);

  if (as_json) {
    json list = json::array();
    for (std::size_t i = 0; i < resolved.size(); ++i) {
      list.push_back({{"rank", i + 1},
                      {"masterlist_id", resolved[i].masterlist_id},
                      {"score", resolved[i].score},
                      {"text", corpus.find_entry(resolved[i].masterlist_id)->text}});
    }
    std::cout << json{{"mode", to_string(mode)}, {"suggestions", list}}.dump() << '\n';
    return 0;
  }
  for (std::size_t i = 0; i < resolved.size(); ++i) {
    std::cout << i + 1 << '\t' << resolved[i].masterlist_id << '\t' << std::fixed << std::setprecision(6)
              << resolved[i].score << '\t' << corpus.find_entry(resolved[i].masterlist_id)->text << '\n';
  }
  return 0;
}

int cmd_eval(const json& s, bool as_json, bool no_dedup) {
  const Corpus corpus = load_from(s);
  const std::string mode_name = str(s, "mode").empty() ? "all" : str(s, "mode");
  const std::string scenario_name = str(s, "scenario").empty() ? "all" : str(s, "scenario");
  const auto modes = modes_from(mode_name, RetrievalMode::sparse, true);
  const auto scenarios = scenarios_from(scenario_name, Scenario::masterlist_only, true);
  FoldAssignment folds;
  const std::string folds_file = str(s, "folds_file");
  if (!folds_file.empty()) {
    std::ifstream in(folds_file);
    if (!in) throw DataError("cannot open " + folds_file);
    folds = read_folds_jsonl(in, count(s, "folds"));
    if (folds.fold_of_pair.size() != corpus.pairs().size()) {
      throw DataError(folds_file + " does not cover the corpus pairs");
    }
  } else {
    if (count(s, "folds") < 2) throw UsageError("--folds must be at least 2");
    folds = split_folds(corpus, count(s, "folds"), s.at("seed").get<std::uint64_t>());
  }

  const RetrieverConfig retriever = retriever_from(s);
  std::shared_ptr<const Embedder> embedder;
  const bool needs_dense = std::any_of(modes.begin(), modes.end(), [](auto m) { return m != RetrievalMode::sparse; });
  if (needs_dense) embedder = make_embedder(embedder_spec_from(s));

  std::vector<EvalReport> reports;
  for (bool dedup : no_dedup ? std::vector<bool>{true, false} : std::vector<bool>{true}) {
    for (auto scenario : scenarios) {
      for (auto mode : modes) {
        EvalConfig config{mode, scenario, retriever, embedder, dedup};
        reports.push_back(run_eval(corpus, folds, config));
      }
    }
  }

  std::ofstream file;
  std::ostream& out = output(s, file);
  if (as_json) {
    json list = json::array();
    for (const auto& r : reports) list.push_back(to_json(r));
    out << list.dump(2) << '\n';
  } else {
    out << format_table(reports);
    for (const auto& r : reports) {
      std::size_t skipped = 0;
      for (const auto& f : r.per_fold) skipped += f.skipped.size();
      if (skipped) out << to_string(r.mode) << '/' << to_string(r.scenario) << ": " << skipped << " unembeddable probes\n";
    }
  }
  return 0;
}

int cmd_train_adapter(const json& s, bool as_json) {
  const Corpus corpus = load_from(s);
  json base_settings = s;
  base_settings["adapter"] = "";
  const auto embedder = make_embedder(embedder_spec_from(base_settings));
  const RetrieverConfig retriever = retriever_from(s);

  std::vector<TrainingPair> pairs;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < corpus.pairs().size(); ++i) {
    const auto& p = corpus.pairs()[i];
    const auto anchor = prepare_text(DocRef::pair(p.masterlist_id, i).key(), p.clinic_text, retriever.normalizer,
                                     embedder.get());
    const auto positive = prepare_text(DocRef::entry(p.masterlist_id).key(), corpus.find_entry(p.masterlist_id)->text,
                                       retriever.normalizer, embedder.get());
    if (!anchor.embedding || !positive.embedding) {
      ++skipped;
      continue;
    }
    pairs.push_back({*anchor.embedding, *positive.embedding, p.masterlist_id});
  }
  if (pairs.empty()) throw DataError("no embeddable training pairs");

  TrainConfig config;
  config.epochs = count(s, "epochs");
  config.batch_size = count(s, "batch_size");
  config.lr = real(s, "lr");
  config.warmup_ratio = real(s, "warmup");
  config.scale = real(s, "scale");
  config.seed = s.at("seed").get<std::uint64_t>();
  config.d_out = count(s, "d_out");
  const TrainResult result = train_adapter(pairs, config);

  const std::string out = str(s, "out");
  if (!out.empty()) save_adapter(fs::path(out), result.adapter);
  if (as_json) {
    std::cout << json{{"pairs", pairs.size()},
                      {"skipped", skipped},
                      {"steps", result.steps},
                      {"batch_collisions", result.batch_collisions},
                      {"epoch_loss", result.epoch_loss}}
                     .dump()
              << '\n';
  } else {
    std::cout << "pairs " << pairs.size() << " (skipped " << skipped << "), steps " << result.steps
              << ", batch collisions " << result.batch_collisions << '\n';
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
      std::cout << "epoch " << std::setw(3) << e + 1 << "  loss " << std::fixed << std::setprecision(6)
                << result.epoch_loss[e] << '\n';
    }
  }
  if (out.empty() && !as_json) std::cerr << "note: no --out given, adapter discarded\n";
  return 0;
}

const char* env_or(const char* name, const char* fallback) {
  const char* v = std::getenv(name);
  return v ? v : fallback;
}

int cmd_serve(json s) {
  if (str(s, "data_dir").empty()) s["data_dir"] = env_or("MEDMATCH_DATA_DIR", "");
  if (str(s, "data_dir").empty()) throw UsageError("set MEDMATCH_DATA_DIR or --data-dir");
  if (str(s, "bind").empty()) s["bind"] = env_or("MEDMATCH_BIND_ADDR", "127.0.0.1:8080");
  const fs::path dir = str(s, "data_dir");
  if (str(s, "adapter").empty() && fs::exists(dir / "adapter.json")) s["adapter"] = (dir / "adapter.json").string();
  print_config("serve", s);

  ServiceConfig config;
  config.retriever = retriever_from(s);
  config.embedder = make_embedder(embedder_spec_from(s));
  config.rebuild_every = count(s, "rebuild_every");
  config.log_path = dir / "review_log.jsonl";
  MappingService service(load_from(s), std::move(config));

  const std::string token = env_or("MEDMATCH_TOKEN", "");
  if (token.empty()) std::cerr << "warning: MEDMATCH_TOKEN is unset, requests are not authenticated\n";

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  HttpServer server(service, token);
  const BindAddress address = parse_bind_address(str(s, "bind"));
  const int port = server.bind(address);
  std::thread listener([&] { server.listen(); });
  std::thread stopper([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  std::cerr << "listening on " << address.host << ':' << port << '\n';
  service.start();
  std::cerr << "index ready, " << service.pair_count() << " pairs\n";
  listener.join();
  pthread_kill(stopper.native_handle(), SIGTERM);
  stopper.join();
  return 0;
}

int cmd_bench(const json& s, bool as_json) {
  const std::size_t n = count(s, "n");
  const std::size_t size = count(s, "index_size");
  const std::size_t k = count(s, "k");
  if (n == 0 || size == 0) throw UsageError("--n and --index-size must be positive");
  if (k < 1 || k > 100) throw UsageError("--k must lie in [1, 100]");
  const RetrievalMode mode = modes_from(str(s, "mode"), RetrievalMode::hybrid, false).front();
  const std::uint64_t seed = s.at("seed").get<std::uint64_t>();

  const Corpus synthetic = make_synthetic_corpus({size, 1, seed});
  Corpus base(synthetic.masterlist(), {});
  ServiceConfig config;
  config.retriever = retriever_from(s);
  if (mode != RetrievalMode::sparse) config.embedder = make_embedder(embedder_spec_from(s));
  MappingService service(std::move(base), std::move(config));

  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  service.start();
  const double build_s = std::chrono::duration<double>(clock::now() - t0).count();

  std::mt19937_64 rng(seed);
  std::vector<double> latency_ms;
  latency_ms.reserve(n);
  std::size_t hits = 0;
  const auto t1 = clock::now();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pair = synthetic.pairs()[rng() % synthetic.pairs().size()];
    const auto q0 = clock::now();
    const auto response = service.suggest(pair.clinic_text, k, mode);
    latency_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - q0).count());
    hits += std::any_of(response.suggestions.begin(), response.suggestions.end(),
                        [&](const Suggestion& sg) { return sg.masterlist_id == pair.masterlist_id; });
  }
  const double total_s = std::chrono::duration<double>(clock::now() - t1).count();

  std::vector<double> sorted = latency_ms;
  std::sort(sorted.begin(), sorted.end());
  const auto pct = [&](double p) { return sorted[std::min(sorted.size() - 1, static_cast<std::size_t>(p * sorted.size()))]; };
  double mean = 0.0;
  for (double v : latency_ms) mean += v;
  mean /= static_cast<double>(n);
  const json result{{"mode", to_string(mode)},     {"index_size", size},
                    {"queries", n},                {"k", k},
                    {"build_s", build_s},          {"total_s", total_s},
                    {"latency_mean_ms", mean},     {"latency_p50_ms", pct(0.5)},
                    {"latency_p95_ms", pct(0.95)}, {"queries_per_s", static_cast<double>(n) / total_s},
                    {"hit_at_k", static_cast<double>(hits) / static_cast<double>(n)}};
  if (as_json) {
    std::cout << result.dump() << '\n';
  } else {
    std::cout << std::fixed << std::setprecision(3) << "index: " << size << " entries, built in " << build_s << " s\n"
              << "queries: " << n << " (" << to_string(mode) << ", k=" << k << ")\n"
              << "per-query latency: mean " << mean << " ms, p50 " << pct(0.5) << " ms, p95 " << pct(0.95)
              << " ms\n"
              << "total: " << total_s << " s (" << static_cast<double>(n) / total_s << " queries/s)\n";
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Clinic procedure to masterlist matching"};
  app.require_subcommand(1);

  struct Command {
    CLI::App* app;
    std::unique_ptr<Settings> settings;
  };
  std::map<std::string, Command> commands;
  const auto add = [&](const std::string& name, const std::string& help, std::vector<std::string> keys) {
    CLI::App* sub = app.add_subcommand(name, help);
    commands[name] = {sub, std::make_unique<Settings>(sub, std::move(keys))};
    return sub;
  };

  add("ingest", "Validate and normalize a masterlist and pairs CSV", join({kCorpusKeys, {"out", "seed"}}));
  add("split", "Write a seeded stratified fold assignment", join({kCorpusKeys, {"folds", "seed", "out"}}));
  add("build-index", "Build and save the BM25 index",
      join({kCorpusKeys, {"scenario", "out", "k1", "b", "lang_dir", "fusion_k", "depth", "seed"}}));
  add("search", "Top-k masterlist suggestions for one text",
      join({kCorpusKeys, kRetrieverKeys, {"q", "k", "mode", "scenario", "seed"}}));
  bool no_dedup = false;
  add("eval", "Cross-validated Acc@k report",
      join({kCorpusKeys, kRetrieverKeys, {"mode", "scenario", "folds", "folds_file", "seed", "out"}}))
      ->add_flag("--no-dedup", no_dedup, "Also report Acc@k without collapsing duplicate ids");
  add("train-adapter", "Fit a linear adapter on the pairs",
      join({kCorpusKeys, kRetrieverKeys, {"epochs", "batch_size", "lr", "warmup", "scale", "d_out", "seed", "out"}}));
  add("serve", "Run the HTTP review service",
      join({kCorpusKeys, kRetrieverKeys, {"bind", "rebuild_every", "seed"}}));
  add("bench", "Measure suggest throughput on a synthetic index",
      join({kRetrieverKeys, {"n", "index_size", "k", "mode", "seed"}}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (auto& [name, command] : commands) {
    if (!command.app->parsed()) continue;
    try {
      const json s = command.settings->resolve();
      if (name != "serve") print_config(name, s);
      const bool as_json = command.settings->json_output();
      if (name == "ingest") return cmd_ingest(s, as_json);
      if (name == "split") return cmd_split(s, as_json);
      if (name == "build-index") return cmd_build_index(s, as_json);
      if (name == "search") return cmd_search(s, as_json);
      if (name == "eval") return cmd_eval(s, as_json, no_dedup);
      if (name == "train-adapter") return cmd_train_adapter(s, as_json);
      if (name == "serve") return cmd_serve(s);
      if (name == "bench") return cmd_bench(s, as_json);
    } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }
  return 1;
}

}  // namespace
}  // namespace medmatch

int main(int argc, char** argv) { return medmatch::run(argc, argv); }
