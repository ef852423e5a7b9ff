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
#include <stdexcept>
#include <string>
#include <vector>

namespace medmatch {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based; 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a data invariant (dangling ids, duplicate ids, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Pairs referencing masterlist ids that do not exist.
class DanglingReferenceError : public DataError {
 public:
  explicit DanglingReferenceError(std::vector<std::string> ids);

  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

/// Vector dimension does not match the store / adapter / file.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Text that yields no features, or a projection that collapses to zero.
class UnembeddableError : public Error {
 public:
  using Error::Error;
};

}  // namespace medmatch
