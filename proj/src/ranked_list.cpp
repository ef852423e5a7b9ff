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

#include "medmatch/ranked_list.hpp"

#include <algorithm>
#include <tuple>

namespace medmatch {

std::string DocRef::key() const {
  if (kind == DocKind::masterlist_entry) return "M:" + masterlist_id;
  return "P:" + std::to_string(pair_index.value_or(0));
}

bool tie_break_less(const DocRef& a, const DocRef& b) {
  // std::string compares bytes; for UTF-8 that is codepoint order.
  const auto kind_a = static_cast<int>(a.kind);
  const auto kind_b = static_cast<int>(b.kind);
  return std::tie(kind_a, a.masterlist_id, a.pair_index) <
         std::tie(kind_b, b.masterlist_id, b.pair_index);
}

RankedList make_ranked_list(std::vector<RankedItem> candidates, std::size_t limit) {
  auto better = [](const RankedItem& x, const RankedItem& y) {
    if (x.score != y.score) return x.score > y.score;
    return tie_break_less(x.ref, y.ref);
  };
  if (candidates.size() > limit) {
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(limit),
                      candidates.end(), better);
    candidates.resize(limit);
  } else {
    std::sort(candidates.begin(), candidates.end(), better);
  }
  RankedList out;
  out.items = std::move(candidates);
  for (std::size_t i = 0; i < out.items.size(); ++i) out.items[i].rank = i + 1;
  return out;
}

}  // namespace medmatch
