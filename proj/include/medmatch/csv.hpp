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
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace medmatch::csv {

struct Record {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

/// RFC 4180 reader: quoted fields may hold commas, CRLF and doubled quotes.
/// Throws ParseError (with line number) on unterminated quotes or stray
/// characters after a closing quote.
std::vector<Record> read(std::istream& in, const std::string& source_name);

/// Writes one field, quoting only when needed.
void write_field(std::ostream& out, std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string_view>& fields);

}  // namespace medmatch::csv
