// Copyright 2026 The shiftadd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
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

namespace shiftadd {

enum class ErrorKind {
  kRange,
  kFormat,
  kCapacity,
  kShape,
  kHeadroom,
  kDataset,
  kIo,
  kNoFit,
  kEquivalence,
};

const char* to_string(ErrorKind kind);

// Base for every error thrown by the library. what() is "<module>: <message>".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

#define SHIFTADD_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                              \
   public:                                                                 \
    Name(std::string module, const std::string& message)                   \
        : Error(ErrorKind::Kind, std::move(module), message) {}            \
  };

SHIFTADD_DEFINE_ERROR(RangeError, kRange)
SHIFTADD_DEFINE_ERROR(FormatError, kFormat)
SHIFTADD_DEFINE_ERROR(CapacityError, kCapacity)
SHIFTADD_DEFINE_ERROR(ShapeError, kShape)
SHIFTADD_DEFINE_ERROR(HeadroomError, kHeadroom)
SHIFTADD_DEFINE_ERROR(DatasetError, kDataset)
SHIFTADD_DEFINE_ERROR(IoError, kIo)
SHIFTADD_DEFINE_ERROR(EquivalenceError, kEquivalence)

#undef SHIFTADD_DEFINE_ERROR

// No plan in the search space fits the requested chip budget.
class NoFitError : public Error {
 public:
  NoFitError(const std::string& message, std::int64_t best_size_bits)
      : Error(ErrorKind::kNoFit, "pruner", message),
        best_size_bits_(best_size_bits) {}

  std::int64_t best_size_bits() const noexcept { return best_size_bits_; }

 private:
  std::int64_t best_size_bits_;
};

}  // namespace shiftadd
