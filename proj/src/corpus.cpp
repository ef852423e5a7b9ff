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

#include "medmatch/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string_view>

#include <json.hpp>

#include "medmatch/csv.hpp"
#include "medmatch/error.hpp"
#include "medmatch/hashing.hpp"
#include "medmatch/textnorm.hpp"

namespace medmatch {

DanglingReferenceError::DanglingReferenceError(std::vector<std::string> ids)
    : DataError([&] {
        std::string msg = "pairs reference unknown masterlist ids:";
        for (const auto& id : ids) msg += " " + id;
        return msg;
      }()),
      ids_(std::move(ids)) {}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); });
}

std::string pair_key(const std::string& text, const std::string& id) {
  std::string key;
  key.reserve(text.size() + id.size() + 1);
  key += text;
  key += '\0';
  key += id;
  return key;
}

std::string trim(std::string_view s) {
  const auto not_space = [](unsigned char c) { return !(c == ' ' || (c >= '\t' && c <= '\r')); };
  auto b = std::find_if(s.begin(), s.end(), not_space);
  auto e = std::find_if(s.rbegin(), s.rend(), not_space).base();
  return b < e ? std::string(b, e) : std::string();
}

}  // namespace

Corpus::Corpus(std::vector<MasterlistEntry> masterlist, std::vector<MappingPair> pairs,
               std::size_t* duplicates_merged)
    : masterlist_(std::move(masterlist)) {
  for (std::size_t i = 0; i < masterlist_.size(); ++i) {
    const auto& e = masterlist_[i];
    if (blank(e.id)) throw DataError("masterlist entry " + std::to_string(i) + " has an empty id");
    if (blank(e.text)) throw DataError("masterlist entry '" + e.id + "' has empty text");
    if (!entry_by_id_.emplace(e.id, i).second) throw DataError("duplicate masterlist id '" + e.id + "'");
  }

  std::vector<std::string> dangling;
  for (const auto& p : pairs) {
    if (!entry_by_id_.contains(p.masterlist_id) &&
        std::find(dangling.begin(), dangling.end(), p.masterlist_id) == dangling.end()) {
      dangling.push_back(p.masterlist_id);
    }
  }
  if (!dangling.empty()) throw DanglingReferenceError(std::move(dangling));

  std::size_t merged = 0;
  pairs_.reserve(pairs.size());
  for (auto& p : pairs) {
    if (blank(p.clinic_text)) throw DataError("pair for '" + p.masterlist_id + "' has empty clinic text");
    if (!add_pair(std::move(p))) ++merged;
  }
  if (duplicates_merged) *duplicates_merged = merged;
}

const MasterlistEntry* Corpus::find_entry(const std::string& id) const {
  auto it = entry_by_id_.find(id);
  return it == entry_by_id_.end() ? nullptr : &masterlist_[it->second];
}

bool Corpus::contains_pair(const std::string& clinic_text, const std::string& masterlist_id) const {
  return pair_by_key_.contains(pair_key(clinic_text, masterlist_id));
}

std::optional<std::size_t> Corpus::add_pair(MappingPair pair) {
  if (!entry_by_id_.contains(pair.masterlist_id)) throw DanglingReferenceError({pair.masterlist_id});
  const std::size_t index = pairs_.size();
  if (!pair_by_key_.emplace(pair_key(pair.clinic_text, pair.masterlist_id), index).second) {
    return std::nullopt;
  }
  pairs_.push_back(std::move(pair));
  return index;
}

Corpus read_corpus(std::istream& masterlist_in, std::istream& pairs_in, IngestReport* report) {
  const auto check_utf8 = [](const std::string& source, const csv::Record& rec) {
    for (const auto& f : rec.fields) {
      if (!valid_utf8(f)) throw ParseError(source, rec.line, "invalid UTF-8");
    }
  };

  std::vector<MasterlistEntry> entries;
  {
    const auto records = csv::read(masterlist_in, "masterlist");
    if (records.empty() || records[0].fields != std::vector<std::string>{"id", "text"}) {
      throw ParseError("masterlist", 1, "expected header 'id,text'");
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& rec = records[r];
      check_utf8("masterlist", rec);
      if (rec.fields.size() != 2) throw ParseError("masterlist", rec.line, "expected 2 fields");
      const std::string id = trim(rec.fields[0]);
      if (id.empty()) throw ParseError("masterlist", rec.line, "empty id");
      if (blank(rec.fields[1])) throw ParseError("masterlist", rec.line, "empty text");
      entries.push_back({id, rec.fields[1]});
    }
  }

  std::vector<MappingPair> pairs;
  {
    const auto records = csv::read(pairs_in, "pairs");
    if (records.empty()) throw ParseError("pairs", 1, "missing header");
    const auto& header = records[0].fields;
    const bool with_clinic = header == std::vector<std::string>{"clinic_text", "masterlist_id", "clinic_id"};
    if (!with_clinic && header != std::vector<std::string>{"clinic_text", "masterlist_id"}) {
      throw ParseError("pairs", 1, "expected header 'clinic_text,masterlist_id[,clinic_id]'");
    }
    const std::size_t width = with_clinic ? 3 : 2;
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& rec = records[r];
      check_utf8("pairs", rec);
      if (rec.fields.size() != width) {
        throw ParseError("pairs", rec.line, "expected " + std::to_string(width) + " fields");
      }
      if (blank(rec.fields[0])) throw ParseError("pairs", rec.line, "empty clinic_text");
      MappingPair p{rec.fields[0], trim(rec.fields[1]), PairSource::dataset, std::nullopt};
      if (with_clinic && !rec.fields[2].empty()) p.clinic_id = rec.fields[2];
      pairs.push_back(std::move(p));
    }
  }

  IngestReport local;
  local.masterlist_rows = entries.size();
  local.pair_rows = pairs.size();
  Corpus corpus(std::move(entries), std::move(pairs), &local.duplicates_merged);
  if (report) *report = local;
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& masterlist_path, const std::filesystem::path& pairs_path,
                   IngestReport* report) {
  std::ifstream m(masterlist_path, std::ios::binary);
  if (!m) throw DataError("cannot open masterlist file " + masterlist_path.string());
  std::ifstream p(pairs_path, std::ios::binary);
  if (!p) throw DataError("cannot open pairs file " + pairs_path.string());
  return read_corpus(m, p, report);
}

void write_masterlist_csv(std::ostream& out, const Corpus& corpus) {
  csv::write_row(out, {"id", "text"});
  for (const auto& e : corpus.masterlist()) csv::write_row(out, {e.id, e.text});
}

void write_pairs_csv(std::ostream& out, const Corpus& corpus) {
  const bool with_clinic = std::any_of(corpus.pairs().begin(), corpus.pairs().end(),
                                       [](const MappingPair& p) { return p.clinic_id.has_value(); });
  if (with_clinic) {
    csv::write_row(out, {"clinic_text", "masterlist_id", "clinic_id"});
  } else {
    csv::write_row(out, {"clinic_text", "masterlist_id"});
  }
  for (const auto& p : corpus.pairs()) {
    if (with_clinic) {
      csv::write_row(out, {p.clinic_text, p.masterlist_id, p.clinic_id.value_or("")});
    } else {
      csv::write_row(out, {p.clinic_text, p.masterlist_id});
    }
  }
}

FoldAssignment split_folds(const Corpus& corpus, std::size_t n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw std::invalid_argument("split_folds: n_folds must be >= 2");
  if (corpus.pairs().empty()) throw std::invalid_argument("split_folds: corpus has no pairs");

  const auto& pairs = corpus.pairs();
  std::unordered_map<std::string_view, std::vector<std::size_t>> by_entry;
  for (std::size_t i = 0; i < pairs.size(); ++i) by_entry[pairs[i].masterlist_id].push_back(i);

  FoldAssignment out;
  out.n_folds = n_folds;
  out.fold_of_pair.assign(pairs.size(), 0);
  for (auto& [id, members] : by_entry) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      if (pairs[a].clinic_text != pairs[b].clinic_text) return pairs[a].clinic_text < pairs[b].clinic_text;
      return a < b;
    });
    const std::size_t start = salted_fnv1a64(seed, id) % n_folds;
    for (std::size_t j = 0; j < members.size(); ++j) out.fold_of_pair[members[j]] = (start + j) % n_folds;
  }
  return out;
}

FoldView fold_view(const FoldAssignment& assignment, std::size_t probe_fold) {
  if (probe_fold >= assignment.n_folds) {
    throw std::out_of_range("fold_view: fold " + std::to_string(probe_fold) + " out of range");
  }
  FoldView view;
  for (std::size_t i = 0; i < assignment.fold_of_pair.size(); ++i) {
    (assignment.fold_of_pair[i] == probe_fold ? view.probe : view.gallery).push_back(i);
  }
  return view;
}

void write_folds_jsonl(std::ostream& out, const FoldAssignment& assignment) {
  for (std::size_t i = 0; i < assignment.fold_of_pair.size(); ++i) {
    out << "{\"pair_index\":" << i << ",\"fold\":" << assignment.fold_of_pair[i] << "}\n";
  }
}

FoldAssignment read_folds_jsonl(std::istream& in, std::size_t n_folds) {
  FoldAssignment out;
  out.n_folds = n_folds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("folds", line_no, e.what());
    }
    if (!rec.contains("pair_index") || !rec.contains("fold")) {
      throw ParseError("folds", line_no, "expected pair_index and fold");
    }
    const auto index = rec["pair_index"].get<std::size_t>();
    const auto fold = rec["fold"].get<std::size_t>();
    if (index != out.fold_of_pair.size()) throw ParseError("folds", line_no, "pair_index out of sequence");
    if (fold >= n_folds) throw ParseError("folds", line_no, "fold out of range");
    out.fold_of_pair.push_back(fold);
  }
  return out;
}

}  // namespace medmatch
