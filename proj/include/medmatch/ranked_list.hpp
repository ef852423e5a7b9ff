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
#include <optional>
#include <string>
#include <vector>

namespace medmatch {

enum class DocKind { masterlist_entry, mapping_pair };

/// What an index entry stands for: a masterlist entry, or a known mapping
/// pair that resolves to `masterlist_id`.
struct DocRef {
  DocKind kind = DocKind::masterlist_entry;
  std::string masterlist_id;
  std::optional<std::size_t> pair_index;

  static DocRef entry(std::string id) { return {DocKind::masterlist_entry, std::move(id), std::nullopt}; }
  static DocRef pair(std::string id, std::size_t index) {
    return {DocKind::mapping_pair, std::move(id), index};
  }

  /// "M:<id>" or "P:<pair_index>", the key used by embedding files.
  std::string key() const;

  friend bool operator==(const DocRef&, const DocRef&) = default;
};

/// Global candidate order for equal scores: entries before pairs, then
/// masterlist id in codepoint order, then pair index.
bool tie_break_less(const DocRef& a, const DocRef& b);

struct RankedItem {
  DocRef ref;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

/// Candidates ordered by score, ranks 1..n.
struct RankedList {
  std::vector<RankedItem> items;

  std::size_t size() const noexcept { return items.size(); }
  bool empty() const noexcept { return items.empty(); }
};

/// Sorts (score desc, tie_break_less), keeps at most `limit`, assigns ranks.
RankedList make_ranked_list(std::vector<RankedItem> candidates, std::size_t limit);

}  // namespace medmatch
