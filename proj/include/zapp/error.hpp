// Copyright 2026 The ZAPP Authors
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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace zapp {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Two operands of a set operation live in spaces of different dimension.
class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::string_view op, std::int64_t lhs, std::int64_t rhs)
      : Error(std::string(op) + ": dimension mismatch (lhs " +
              std::to_string(lhs) + ", rhs " + std::to_string(rhs) + ")"),
        lhs_(lhs),
        rhs_(rhs) {}

  std::int64_t lhs() const { return lhs_; }
  std::int64_t rhs() const { return rhs_; }

 private:
  std::int64_t lhs_;
  std::int64_t rhs_;
};

// A generator column is too short for the halfspace conversion.
class DegenerateGenerator : public Error {
 public:
  DegenerateGenerator(std::int64_t column, double length)
      : Error("to_hrep: generator column " + std::to_string(column) +
              " has length " + std::to_string(length) +
              "; drop degenerate columns with normalize_generators first"),
        column_(column) {}

  std::int64_t column() const { return column_; }

 private:
  std::int64_t column_;
};

// Non-finite value encountered while evaluating a dynamics or solver term.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace zapp
