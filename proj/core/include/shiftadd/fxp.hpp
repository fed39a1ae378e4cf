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

// Fixed-point formats, quantization and the bit-shift primitive.

#include <cstdint>
#include <string>

namespace shiftadd {

// Signed two's-complement fixed-point format with `total_bits` bits of which
// `frac_bits` are fractional. Invariant: 2 <= W <= 32, 0 <= F < W.
class FixedPointFormat {
 public:
  // Default weight format (W=16, F=12).
  constexpr FixedPointFormat() = default;
  // Throws RangeError when the invariant does not hold.
  FixedPointFormat(int total_bits, int frac_bits);

  // Parses "W:F".
  static FixedPointFormat parse(const std::string& text);

  int total_bits() const noexcept { return total_bits_; }
  int frac_bits() const noexcept { return frac_bits_; }
  bool is_signed() const noexcept { return true; }

  std::int64_t raw_min() const noexcept {
    return -(std::int64_t{1} << (total_bits_ - 1));
  }
  std::int64_t raw_max() const noexcept {
    return (std::int64_t{1} << (total_bits_ - 1)) - 1;
  }
  bool contains(std::int64_t raw) const noexcept {
    return raw >= raw_min() && raw <= raw_max();
  }
  double real_min() const noexcept;
  double real_max() const noexcept;
  // Weight of one raw unit, 2^-F.
  double lsb() const noexcept;

  // Full-budget term count for CSD recoding of this width, ceil((W+1)/2).
  int max_terms() const noexcept { return (total_bits_ + 2) / 2; }

  std::string to_string() const;

  friend bool operator==(const FixedPointFormat&,
                         const FixedPointFormat&) = default;

 private:
  int total_bits_ = 16;
  int frac_bits_ = 12;
};

struct QuantizedScalar {
  std::int64_t raw = 0;
  FixedPointFormat fmt;

  friend bool operator==(const QuantizedScalar&,
                         const QuantizedScalar&) = default;
};

struct QuantizeResult {
  QuantizedScalar value;
  bool saturated = false;
};

// Round-half-to-even of x * 2^F, saturated to the representable range.
QuantizeResult quantize(double x, FixedPointFormat fmt);
double dequantize(const QuantizedScalar& q) noexcept;

// Nearest integer, ties to even. Saturates at the int64 range.
std::int64_t round_half_even(double x) noexcept;

// Exact division by 2^shift with round-half-to-even, shift >= 0. Only shifts,
// adds and compares are used.
std::int64_t shift_right_round_even(std::int64_t value, int shift) noexcept;

// Converts a raw value carrying `from_frac` fractional bits into `to`,
// rounding half to even and saturating. Sets *saturated when clamping.
std::int64_t requantize(std::int64_t raw, int from_frac, FixedPointFormat to,
                        bool* saturated = nullptr) noexcept;

// Width of the emulator's accumulator.
inline constexpr int kAccumulatorBits = 64;

// s * x * 2^p for p >= 0; s * floor(x / 2^-p) for p < 0 (arithmetic shift).
// p must lie in [-(kAccumulatorBits-1), kAccumulatorBits-1]; a left shift
// that would overflow the accumulator throws RangeError.
std::int64_t shift_apply(std::int64_t x, int p, int s);

}  // namespace shiftadd
