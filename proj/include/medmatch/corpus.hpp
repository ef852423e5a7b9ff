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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace medmatch {

/// One standardized procedure name; the retrieval target.
struct MasterlistEntry {
  std::string id;
  std::string text;

  friend bool operator==(const MasterlistEntry&, const MasterlistEntry&) = default;
};

enum class PairSource { dataset, reviewer };

/// Known association between a clinic description and a masterlist entry.
struct MappingPair {
  std::string clinic_text;
  std::string masterlist_id;
  PairSource source = PairSource::dataset;
  std::optional<std::string> clinic_id;

  friend bool operator==(const MappingPair&, const MappingPair&) = default;
};

/// Masterlist plus mapping pairs, with every pair resolving to an entry
/// and no two pairs sharing (clinic_text, masterlist_id).
class Corpus {
 public:
  Corpus() = default;

  /// Validates invariants. Exact duplicate pairs are merged; the number
  /// merged is written to `duplicates_merged` when given. Throws DataError
  /// on duplicate or blank ids/texts and DanglingReferenceError on pairs
  /// whose masterlist id does not exist.
  Corpus(std::vector<MasterlistEntry> masterlist, std::vector<MappingPair> pairs,
         std::size_t* duplicates_merged = nullptr);

  const std::vector<MasterlistEntry>& masterlist() const noexcept { return masterlist_; }
  const std::vector<MappingPair>& pairs() const noexcept { return pairs_; }

  const MasterlistEntry* find_entry(const std::string& id) const;
  bool contains_pair(const std::string& clinic_text, const std::string& masterlist_id) const;

  /// Appends a pair; returns its index, or nullopt when it is already present.
  /// Throws DanglingReferenceError for an unknown masterlist id.
  std::optional<std::size_t> add_pair(MappingPair pair);

 private:
  std::vector<MasterlistEntry> masterlist_;
  std::vector<MappingPair> pairs_;
  std::unordered_map<std::string, std::size_t> entry_by_id_;
  std::unordered_map<std::string, std::size_t> pair_by_key_;
};

struct IngestReport {
  std::size_t masterlist_rows = 0;
  std::size_t pair_rows = 0;
  std::size_t duplicates_merged = 0;
};

/// Masterlist CSV header `id,text`; pairs CSV header
/// `clinic_text,masterlist_id[,clinic_id]`. Both UTF-8, RFC 4180 quoting.
Corpus load_corpus(const std::filesystem::path& masterlist_path,
                   const std::filesystem::path& pairs_path, IngestReport* report = nullptr);
Corpus read_corpus(std::istream& masterlist, std::istream& pairs, IngestReport* report = nullptr);

void write_masterlist_csv(std::ostream& out, const Corpus& corpus);
void write_pairs_csv(std::ostream& out, const Corpus& corpus);

/// Probe/gallery partition of a corpus' pairs into folds.
struct FoldAssignment {
  std::size_t n_folds = 5;
  std::vector<std::size_t> fold_of_pair;  // indexed by pair index

  friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

/// Stratified round-robin: each entry's pairs, ordered by clinic text, are
/// dealt over the folds starting at a fold picked by hashing (seed, id).
/// Per-entry fold counts therefore differ by at most one.
FoldAssignment split_folds(const Corpus& corpus, std::size_t n_folds, std::uint64_t seed);

struct FoldView {
  std::vector<std::size_t> gallery;  // pair indices, ascending
  std::vector<std::size_t> probe;
};

/// Throws std::out_of_range when `probe_fold >= n_folds`.
FoldView fold_view(const FoldAssignment& assignment, std::size_t probe_fold);

/// JSON Lines, `{"pair_index": i, "fold": f}` per pair sorted by pair index.
void write_folds_jsonl(std::ostream& out, const FoldAssignment& assignment);
FoldAssignment read_folds_jsonl(std::istream& in, std::size_t n_folds);

}  // namespace medmatch
