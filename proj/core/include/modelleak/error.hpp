// Copyright 2026 The Modelleak Authors
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

#include <stdexcept>
#include <string>

namespace modelleak {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or out-of-range configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor/vector dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Document violates its preconditions (e.g. no tokens).
class InvalidDocument : public Error {
 public:
  using Error::Error;
};

// Class index outside [0, num_classes).
class InvalidLabel : public Error {
 public:
  using Error::Error;
};

// An operation that needs data received none.
class EmptyDataset : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Malformed input file; carries a line number where applicable.
class ParseError : public Error {
 public:
  using Error::Error;
  ParseError(const std::string& msg, size_t line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  size_t line() const { return line_; }

 private:
  size_t line_ = 0;
};

// Value not declared by the attribute schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Query budget would be exceeded; nothing was spent.
class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

// Remote API returned a non-success status.
class ApiError : public Error {
 public:
  using Error::Error;
};

// Server failed to bind or start.
class StartupError : public Error {
 public:
  using Error::Error;
};

}  // namespace modelleak
