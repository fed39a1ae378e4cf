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

#include "shiftadd/errors.hpp"

namespace shiftadd {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kCapacity: return "capacity error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kHeadroom: return "headroom error";
    case ErrorKind::kDataset: return "dataset error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kNoFit: return "no-fit error";
    case ErrorKind::kEquivalence: return "equivalence violation";
  }
  return "error";
}

Error::Error(ErrorKind kind, std::string module, const std::string& message)
    : std::runtime_error(module + ": " + message),
      kind_(kind),
      module_(std::move(module)) {}

}  // namespace shiftadd
