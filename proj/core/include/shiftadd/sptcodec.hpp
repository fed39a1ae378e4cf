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

// Signed power-of-two (SPT) decomposition of quantized weights, the
// minority-position encoding, and the 6-bit record bitstream.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "shiftadd/fxp.hpp"

namespace shiftadd {

// One hardware shift: sign * 2^shift, shift relative to the quantized LSB.
struct SptTerm {
  int sign = 1;   // +1 or -1
  int shift = 0;  // 0..31

  friend bool operator==(const SptTerm&, const SptTerm&) = default;
};

inline constexpr int kMaxShift = 31;

// A weight as a bounded list of SPT terms, ordered by descending shift.
struct SptWeight {
  std::vector<SptTerm> terms;
  FixedPointFormat fmt;

  friend bool operator==(const SptWeight&, const SptWeight&) = default;
};

// Canonical signed-digit (non-adjacent form) recoding of q, returned in
// descending shift order. Throws RangeError unless q fits a signed W-bit
// integer (1 <= W <= 32).
std::vector<SptTerm> csd_recode(std::int64_t q, int total_bits);

// Keeps the `max_terms` most significant CSD terms of q.
SptWeight decompose(std::int64_t q, FixedPointFormat fmt, int max_terms);

std::int64_t reconstruct(std::span<const SptTerm> terms) noexcept;
inline std::int64_t reconstruct(const SptWeight& w) noexcept {
  return reconstruct(std::span<const SptTerm>(w.terms));
}

// Pattern stored as the 1-based (from LSB) positions of its minority digit.
struct MinorityRecord {
  int width = 0;
  int majority_digit = 0;
  std::vector<int> positions;

  friend bool operator==(const MinorityRecord&,
                         const MinorityRecord&) = default;
};

// Ties between zeros and ones resolve to majority_digit = 0.
MinorityRecord encode_minority(std::uint64_t u, int width);
// Throws FormatError on malformed records.
std::uint64_t decode_minority(const MinorityRecord& r);
// Shift-add realisation of decode_minority: for majority 1 the all-ones
// pattern is (x << width) - x, then each minority zero is subtracted.
std::vector<SptTerm> as_terms(const MinorityRecord& r);

// 6-bit record: bit 5 = sign (1 => -1), bits 4..0 = shift. 0b111111 is NOP.
class PackedRecord {
 public:
  static constexpr std::uint8_t kNopBits = 0x3F;
  static constexpr int kBits = 6;

  // Throws FormatError for terms that cannot be encoded or would alias NOP.
  static PackedRecord from_term(const SptTerm& term);
  static constexpr PackedRecord nop() noexcept { return PackedRecord(kNopBits); }
  static constexpr PackedRecord from_bits(std::uint8_t bits) noexcept {
    return PackedRecord(static_cast<std::uint8_t>(bits & kNopBits));
  }

  constexpr std::uint8_t bits() const noexcept { return bits_; }
  constexpr bool is_nop() const noexcept { return bits_ == kNopBits; }
  constexpr SptTerm term() const noexcept {
    return SptTerm{(bits_ & 0x20) != 0 ? -1 : 1, bits_ & 0x1F};
  }

 private:
  constexpr explicit PackedRecord(std::uint8_t bits) : bits_(bits) {}
  std::uint8_t bits_;
};

// MSB-first bit buffer; `bit_count` excludes the trailing byte pad.
struct Bitstream {
  std::vector<std::uint8_t> bytes;
  std::size_t bit_count = 0;

  friend bool operator==(const Bitstream&, const Bitstream&) = default;
};

// Weight-major, slot-major records; each weight's terms in descending shift
// order followed by NOP fill up to `slots`.
Bitstream pack_records(std::span<const SptWeight> weights, int slots);

std::vector<SptWeight> unpack_records(const Bitstream& stream,
                                      std::size_t count, int slots,
                                      FixedPointFormat fmt);

// Reads one record without materialising weights. Index is weight*slots+slot.
PackedRecord read_record(const Bitstream& stream, std::size_t record_index);

}  // namespace shiftadd
