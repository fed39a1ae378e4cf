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

#include "shiftadd/fxp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "shiftadd/errors.hpp"

namespace shiftadd {

FixedPointFormat::FixedPointFormat(int total_bits, int frac_bits)
    : total_bits_(total_bits), frac_bits_(frac_bits) {
  if (total_bits < 2 || total_bits > 32) {
    throw RangeError("fxp", "total_bits must be in [2, 32], got " +
                                std::to_string(total_bits));
  }
  if (frac_bits < 0 || frac_bits >= total_bits) {
    throw RangeError("fxp", "frac_bits must be in [0, W-1], got " +
                                std::to_string(frac_bits) + " for W=" +
                                std::to_string(total_bits));
  }
}

FixedPointFormat FixedPointFormat::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw RangeError("fxp", "format must be W:F, got '" + text + "'");
  }
  try {
    std::size_t used_w = 0;
    std::size_t used_f = 0;
    const std::string w_text = text.substr(0, colon);
    const std::string f_text = text.substr(colon + 1);
    const int w = std::stoi(w_text, &used_w);
    const int f = std::stoi(f_text, &used_f);
    if (used_w != w_text.size() || used_f != f_text.size()) {
      throw std::invalid_argument(text);
    }
    return FixedPointFormat(w, f);
  } catch (const std::logic_error&) {
    throw RangeError("fxp", "format must be W:F, got '" + text + "'");
  }
}

double FixedPointFormat::real_min() const noexcept {
  return std::ldexp(static_cast<double>(raw_min()), -frac_bits_);
}

double FixedPointFormat::real_max() const noexcept {
  return std::ldexp(static_cast<double>(raw_max()), -frac_bits_);
}

double FixedPointFormat::lsb() const noexcept {
  return std::ldexp(1.0, -frac_bits_);
}

std::string FixedPointFormat::to_string() const {
  std::ostringstream os;
  os << total_bits_ << ':' << frac_bits_;
  return os.str();
}

std::int64_t round_half_even(double x) noexcept {
  constexpr double kLimit = 9.2233720368547758e18;  // 2^63
  if (std::isnan(x)) return 0;
  if (x >= kLimit) return std::numeric_limits<std::int64_t>::max();
  if (x < -kLimit) return std::numeric_limits<std::int64_t>::min();
  const double floor_x = std::floor(x);
  const double diff = x - floor_x;
  double r = floor_x;
  if (diff > 0.5) {
    r = floor_x + 1.0;
  } else if (diff == 0.5) {
    r = std::fmod(floor_x, 2.0) == 0.0 ? floor_x : floor_x + 1.0;
  }
  if (r >= kLimit) return std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(r);
}

QuantizeResult quantize(double x, FixedPointFormat fmt) {
  QuantizeResult out;
  out.value.fmt = fmt;
  const std::int64_t raw = round_half_even(std::ldexp(x, fmt.frac_bits()));
  if (raw < fmt.raw_min()) {
    out.value.raw = fmt.raw_min();
    out.saturated = true;
  } else if (raw > fmt.raw_max()) {
    out.value.raw = fmt.raw_max();
    out.saturated = true;
  } else {
    out.value.raw = raw;
  }
  return out;
}

double dequantize(const QuantizedScalar& q) noexcept {
  return std::ldexp(static_cast<double>(q.raw), -q.fmt.frac_bits());
}

std::int64_t shift_right_round_even(std::int64_t value, int shift) noexcept {
  if (shift <= 0) return value;
  // |value| <= 2^63 is at most half of 2^shift, which rounds to even zero.
  if (shift > 63) return 0;
  const std::int64_t floor_q = value >> shift;
  const std::uint64_t mask = (std::uint64_t{1} << shift) - 1;
  const std::uint64_t rem = static_cast<std::uint64_t>(value) & mask;
  const std::uint64_t half = std::uint64_t{1} << (shift - 1);
  if (rem > half || (rem == half && (floor_q & 1) != 0)) {
    return floor_q + 1;
  }
  return floor_q;
}

std::int64_t requantize(std::int64_t raw, int from_frac, FixedPointFormat to,
                        bool* saturated) noexcept {
  const int delta = from_frac - to.frac_bits();
  std::int64_t value = raw;
  bool clamped = false;
  if (delta > 0) {
    value = shift_right_round_even(raw, delta);
  } else if (delta < 0) {
    const int left = -delta;
    // Anything with magnitude >= 2^(63-left) saturates regardless of format.
    const std::int64_t limit = std::int64_t{1} << (62 - std::min(left, 62));
    if (raw >= limit) {
      value = to.raw_max();
      clamped = true;
    } else if (raw < -limit) {
      value = to.raw_min();
      clamped = true;
    } else {
      value = raw << left;
    }
  }
  if (value > to.raw_max()) {
    value = to.raw_max();
    clamped = true;
  } else if (value < to.raw_min()) {
    value = to.raw_min();
    clamped = true;
  }
  if (saturated != nullptr) *saturated = clamped;
  return value;
}

std::int64_t shift_apply(std::int64_t x, int p, int s) {
  if (p >= kAccumulatorBits || p <= -kAccumulatorBits) {
    throw RangeError("fxp", "shift amount " + std::to_string(p) +
                                " outside accumulator width");
  }
  if (s != 1 && s != -1) {
    throw RangeError("fxp", "sign must be +1 or -1");
  }
  std::int64_t shifted = 0;
  if (p >= 0) {
    shifted = static_cast<std::int64_t>(static_cast<std::uint64_t>(x) << p);
    if ((shifted >> p) != x) {
      throw RangeError("fxp", "left shift by " + std::to_string(p) +
                                  " overflows the accumulator");
    }
  } else {
    shifted = x >> -p;
  }
  if (s < 0) {
    if (shifted == std::numeric_limits<std::int64_t>::min()) {
      throw RangeError("fxp", "negation overflows the accumulator");
    }
    return -shifted;
  }
  return shifted;
}

}  // namespace shiftadd
