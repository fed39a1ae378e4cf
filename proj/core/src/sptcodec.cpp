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

#include "shiftadd/sptcodec.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "shiftadd/errors.hpp"

namespace shiftadd {
namespace {

void check_width(int total_bits) {
  if (total_bits < 1 || total_bits > 32) {
    throw RangeError("sptcodec", "bit width must be in [1, 32], got " +
                                     std::to_string(total_bits));
  }
}

class BitWriter {
 public:
  explicit BitWriter(std::size_t expected_bits) {
    out_.bytes.reserve((expected_bits + 7) / 8);
  }

  void put(std::uint32_t value, int bits) {
    for (int b = bits - 1; b >= 0; --b) {
      const std::size_t byte = out_.bit_count / 8;
      if (byte == out_.bytes.size()) out_.bytes.push_back(0);
      if ((value >> b) & 1U) {
        out_.bytes[byte] |= static_cast<std::uint8_t>(0x80U >> (out_.bit_count % 8));
      }
      ++out_.bit_count;
    }
  }

  Bitstream finish() && { return std::move(out_); }

 private:
  Bitstream out_;
};

std::uint32_t get_bits(const Bitstream& s, std::size_t bit_offset, int bits) {
  std::uint32_t value = 0;
  for (int i = 0; i < bits; ++i) {
    const std::size_t pos = bit_offset + static_cast<std::size_t>(i);
    const std::uint8_t byte = s.bytes[pos / 8];
    value = (value << 1) | ((byte >> (7 - pos % 8)) & 1U);
  }
  return value;
}

}  // namespace

std::vector<SptTerm> csd_recode(std::int64_t q, int total_bits) {
  check_width(total_bits);
  const std::int64_t lo = -(std::int64_t{1} << (total_bits - 1));
  const std::int64_t hi = (std::int64_t{1} << (total_bits - 1)) - 1;
  if (q < lo || q > hi) {
    throw RangeError("sptcodec", "value " + std::to_string(q) +
                                     " does not fit " +
                                     std::to_string(total_bits) + " bits");
  }
  std::vector<SptTerm> terms;
  std::int64_t n = q;
  int pos = 0;
  while (n != 0) {
    if ((n & 1) != 0) {
      // n mod 4 == 1 -> +1, n mod 4 == 3 -> -1; leaves n divisible by 4.
      const int digit = 2 - static_cast<int>(n & 3);
      terms.push_back(SptTerm{digit, pos});
      n -= digit;
    }
    n >>= 1;
    ++pos;
  }
  std::reverse(terms.begin(), terms.end());
  return terms;
}

SptWeight decompose(std::int64_t q, FixedPointFormat fmt, int max_terms) {
  if (max_terms < 1) {
    throw RangeError("sptcodec", "term budget must be >= 1, got " +
                                     std::to_string(max_terms));
  }
  SptWeight w;
  w.fmt = fmt;
  w.terms = csd_recode(q, fmt.total_bits());
  if (w.terms.size() > static_cast<std::size_t>(max_terms)) {
    w.terms.resize(static_cast<std::size_t>(max_terms));
  }
  return w;
}

std::int64_t reconstruct(std::span<const SptTerm> terms) noexcept {
  std::int64_t sum = 0;
  for (const SptTerm& t : terms) {
    const std::int64_t mag = std::int64_t{1} << t.shift;
    sum += t.sign < 0 ? -mag : mag;
  }
  return sum;
}

MinorityRecord encode_minority(std::uint64_t u, int width) {
  if (width < 1 || width > 63) {
    throw RangeError("sptcodec", "pattern width must be in [1, 63], got " +
                                     std::to_string(width));
  }
  if ((u >> width) != 0) {
    throw RangeError("sptcodec", "value " + std::to_string(u) +
                                     " does not fit " + std::to_string(width) +
                                     " bits");
  }
  const int ones = std::popcount(u);
  MinorityRecord r;
  r.width = width;
  r.majority_digit = ones > width - ones ? 1 : 0;
  const std::uint64_t minority_bit = r.majority_digit == 1 ? 0 : 1;
  for (int j = 0; j < width; ++j) {
    if (((u >> j) & 1U) == minority_bit) r.positions.push_back(j + 1);
  }
  return r;
}

namespace {

void validate_minority(const MinorityRecord& r) {
  if (r.width < 1 || r.width > 63) {
    throw FormatError("sptcodec", "record width " + std::to_string(r.width) +
                                      " outside [1, 63]");
  }
  if (r.majority_digit != 0 && r.majority_digit != 1) {
    throw FormatError("sptcodec", "majority digit must be 0 or 1");
  }
  if (r.positions.size() > static_cast<std::size_t>(r.width / 2)) {
    throw FormatError("sptcodec", "more minority positions than width/2");
  }
  int prev = 0;
  for (int p : r.positions) {
    if (p <= prev || p > r.width) {
      throw FormatError("sptcodec",
                        "positions must be strictly increasing in [1, width]");
    }
    prev = p;
  }
}

}  // namespace

std::uint64_t decode_minority(const MinorityRecord& r) {
  validate_minority(r);
  std::uint64_t marked = 0;
  for (int p : r.positions) marked |= std::uint64_t{1} << (p - 1);
  if (r.majority_digit == 0) return marked;
  const std::uint64_t all_ones = (std::uint64_t{1} << r.width) - 1;
  return all_ones - marked;
}

std::vector<SptTerm> as_terms(const MinorityRecord& r) {
  validate_minority(r);
  std::vector<SptTerm> terms;
  if (r.majority_digit == 0) {
    for (auto it = r.positions.rbegin(); it != r.positions.rend(); ++it) {
      terms.push_back(SptTerm{1, *it - 1});
    }
    return terms;
  }
  if (r.width > kMaxShift) {
    throw FormatError("sptcodec", "majority-one width " +
                                      std::to_string(r.width) +
                                      " needs a shift beyond 31");
  }
  terms.push_back(SptTerm{1, r.width});
  for (auto it = r.positions.rbegin(); it != r.positions.rend(); ++it) {
    terms.push_back(SptTerm{-1, *it - 1});
  }
  terms.push_back(SptTerm{-1, 0});
  return terms;
}

PackedRecord PackedRecord::from_term(const SptTerm& term) {
  if (term.sign != 1 && term.sign != -1) {
    throw FormatError("sptcodec", "term sign must be +1 or -1");
  }
  if (term.shift < 0 || term.shift > kMaxShift) {
    throw FormatError("sptcodec", "term shift " + std::to_string(term.shift) +
                                      " outside [0, 31]");
  }
  const auto bits = static_cast<std::uint8_t>((term.sign < 0 ? 0x20 : 0) |
                                              term.shift);
  if (bits == kNopBits) {
    throw FormatError("sptcodec", "term (-1, 31) collides with the NOP record");
  }
  return PackedRecord(bits);
}

Bitstream pack_records(std::span<const SptWeight> weights, int slots) {
  if (slots < 1) {
    throw CapacityError("sptcodec", "slot count must be >= 1");
  }
  BitWriter writer(weights.size() * static_cast<std::size_t>(slots) *
                   PackedRecord::kBits);
  std::vector<SptTerm> sorted;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& terms = weights[i].terms;
    if (terms.size() > static_cast<std::size_t>(slots)) {
      throw CapacityError("sptcodec",
                          "weight " + std::to_string(i) + " has " +
                              std::to_string(terms.size()) + " terms, only " +
                              std::to_string(slots) + " slots");
    }
    sorted.assign(terms.begin(), terms.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const SptTerm& a, const SptTerm& b) { return a.shift > b.shift; });
    for (std::size_t k = 1; k < sorted.size(); ++k) {
      if (sorted[k].shift == sorted[k - 1].shift) {
        throw FormatError("sptcodec", "weight " + std::to_string(i) +
                                          " repeats shift " +
                                          std::to_string(sorted[k].shift));
      }
    }
    for (const SptTerm& t : sorted) {
      writer.put(PackedRecord::from_term(t).bits(), PackedRecord::kBits);
    }
    for (std::size_t k = sorted.size(); k < static_cast<std::size_t>(slots); ++k) {
      writer.put(PackedRecord::kNopBits, PackedRecord::kBits);
    }
  }
  return std::move(writer).finish();
}

PackedRecord read_record(const Bitstream& stream, std::size_t record_index) {
  const std::size_t offset = record_index * PackedRecord::kBits;
  if (offset + PackedRecord::kBits > stream.bit_count ||
      (offset + PackedRecord::kBits + 7) / 8 > stream.bytes.size()) {
    throw FormatError("sptcodec", "record " + std::to_string(record_index) +
                                      " beyond end of stream");
  }
  return PackedRecord::from_bits(
      static_cast<std::uint8_t>(get_bits(stream, offset, PackedRecord::kBits)));
}

std::vector<SptWeight> unpack_records(const Bitstream& stream,
                                      std::size_t count, int slots,
                                      FixedPointFormat fmt) {
  if (slots < 1) {
    throw CapacityError("sptcodec", "slot count must be >= 1");
  }
  const std::size_t need_bits =
      count * static_cast<std::size_t>(slots) * PackedRecord::kBits;
  if (stream.bit_count < need_bits || stream.bytes.size() < (need_bits + 7) / 8) {
    throw FormatError("sptcodec", "truncated stream: need " +
                                      std::to_string(need_bits) + " bits, have " +
                                      std::to_string(stream.bit_count));
  }
  std::vector<SptWeight> out(count);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    out[i].fmt = fmt;
    bool seen_nop = false;
    for (int k = 0; k < slots; ++k, offset += PackedRecord::kBits) {
      const auto rec = PackedRecord::from_bits(static_cast<std::uint8_t>(
          get_bits(stream, offset, PackedRecord::kBits)));
      if (rec.is_nop()) {
        seen_nop = true;
        continue;
      }
      if (seen_nop) {
        throw FormatError("sptcodec", "weight " + std::to_string(i) +
                                          " has a term after NOP fill");
      }
      const SptTerm t = rec.term();
      if (!out[i].terms.empty() && out[i].terms.back().shift <= t.shift) {
        throw FormatError("sptcodec", "weight " + std::to_string(i) +
                                          " terms not in descending shift order");
      }
      out[i].terms.push_back(t);
    }
  }
  return out;
}

}  // namespace shiftadd
