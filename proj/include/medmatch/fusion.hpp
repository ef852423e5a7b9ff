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
#include <span>

#include "medmatch/ranked_list.hpp"

namespace medmatch {

enum class MissingPolicy { skip };

struct RrfConfig {
  double k = 60.0;
  MissingPolicy missing = MissingPolicy::skip;
};

/// Reciprocal rank fusion: each candidate scores sum over the rankings that
/// contain it of 1 / (k + rank). Only ranks are used, never raw scores.
/// Contributions are summed in sorted order so the result does not depend
/// on the order of `rankings`.
RankedList rrf_fuse(std::span<const RankedList> rankings, const RrfConfig& config, std::size_t limit);

}  // namespace medmatch
