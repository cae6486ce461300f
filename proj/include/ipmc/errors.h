// Copyright 2026 The IPMC Authors.
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

#ifndef IPMC_ERRORS_H_
#define IPMC_ERRORS_H_

#include <stdexcept>
#include <string>

namespace ipmc {

// Base class for every error raised by the library. The kind string is
// stable and used in the CLI's machine-readable error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string &message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string &kind() const { return kind_; }

 private:
  std::string kind_;
};

// Invalid hyper-parameters, dimensions or option combinations.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string &message)
      : Error("config", message) {}
};

// Input outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string &message)
      : Error("domain", message) {}
};

// Operand shapes inconsistent with an operation.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string &message) : Error("shape", message) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string &message) : Error("index", message) {}
};

class SamplingError : public Error {
 public:
  explicit SamplingError(const std::string &message)
      : Error("sampling", message) {}
};

// Non-finite or exploding values during optimization.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string &message)
      : Error("divergence", message) {}
};

// Malformed, truncated or mismatched files.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string &message)
      : Error("format", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string &message) : Error("io", message) {}
};

}  // namespace ipmc

#endif  // IPMC_ERRORS_H_
