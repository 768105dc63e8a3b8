// Copyright 2026 The wseg Authors. All Rights Reserved.
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

namespace wseg {

// Every failure raised by the library derives from Error. kind() is a stable
// lowercase token used by the CLI when it prints its one-line error report.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& m) : Error("data", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

// Malformed file content. offset is the byte position where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& m, std::size_t offset);
  std::size_t offset() const noexcept { return offset_; }
  // The message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t offset_;
  std::string detail_;
};

// Loss or metric requested over an empty population.
class UndefinedError : public Error {
 public:
  explicit UndefinedError(const std::string& m) : Error("undefined", m) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& m) : Error("usage", m) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& m) : Error("internal", m) {}
};

}  // namespace wseg
