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

#include "medmatch/fusion.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace medmatch {

namespace {

struct RefLess {
  bool operator()(const DocRef& a, const DocRef& b) const { return tie_break_less(a, b); }
};

}  // namespace

RankedList rrf_fuse(std::span<const RankedList> rankings, const RrfConfig& config, std::size_t limit) {
  if (rankings.empty()) throw std::invalid_argument("rrf_fuse: need at least one ranking");
  if (limit == 0) throw std::invalid_argument("rrf_fuse: limit must be >= 1");
  if (!(config.k + 1.0 > 0.0)) throw std::invalid_argument("rrf_fuse: k + 1 must be positive");

  std::map<DocRef, std::vector<double>, RefLess> contributions;
  for (const auto& ranking : rankings) {
    for (std::size_t pos = 0; pos < ranking.items.size(); ++pos) {
      const auto& item = ranking.items[pos];
      const double rank = static_cast<double>(item.rank ? item.rank : pos + 1);
      contributions[item.ref].push_back(1.0 / (config.k + rank));
    }
  }

  std::vector<RankedItem> fused;
  fused.reserve(contributions.size());
  for (auto& [ref, parts] : contributions) {
    std::sort(parts.begin(), parts.end());
    double score = 0.0;
    for (double p : parts) score += p;
    fused.push_back({ref, score, 0});
  }
  return make_ranked_list(std::move(fused), limit);
}

}  // namespace medmatch
