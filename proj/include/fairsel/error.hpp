// Copyright 2026 The fairsel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace fairsel {

// Root of every exception the library throws. The CLI maps the three
// families below onto its exit codes (usage / data / numerical).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed something malformed: mismatched shapes, a selection that
// touches a masked feature, an out-of-range option.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionError : public InvalidArgument {
 public:
  DimensionError(const std::string& what, std::size_t expected,
                 std::size_t actual)
      : InvalidArgument(what + ": expected dimension " +
                        std::to_string(expected) + ", got " +
                        std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

// Problems with input data: files, schemas, cells, degenerate groups.
class DataError : public Error {
 public:
  using Error::Error;
};

// A cell that cannot be interpreted under its declared column kind.
// Row numbers are 1-based data rows (the header is row 0).
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t row, std::string column)
      : DataError(what + " (row " + std::to_string(row) + ", column '" +
                  column + "')"),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

// A metric's denominator is empty, e.g. a group without positive labels.
class DegenerateGroupError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite values, divergence, failed gradient checks.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace fairsel
