// SPDX-License-Identifier: Apache-2.0
#include "qnnv/requant.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace qnnv {

using i128 = __int128;
using u128 = unsigned __int128;

namespace {

constexpr int kHugeShift = 118;  // |mantissa * acc| < 2^116, so the value is < 1/4
constexpr int64_t kEnumerationCap = int64_t{1} << 27;

int64_t to_int64(i128 v) {
  if (v > std::numeric_limits<int64_t>::max() || v < std::numeric_limits<int64_t>::min())
    throw OverflowError("requantized value does not fit in 64 bits");
  return static_cast<int64_t>(v);
}

// Quotient of N / 2^shift rounded per mode, shift in [1, kHugeShift).
i128 round_shifted(i128 n, int shift, RoundingMode mode) {
  const i128 q = n >> shift;  // floor
  const i128 rem = n - (q << shift);
  const i128 half = i128{1} << (shift - 1);
  if (rem > half) return q + 1;
  if (rem < half) return q;
  if (mode == RoundingMode::kHalfUp) return q + 1;
  return (q & 1) ? q + 1 : q;
}

template <typename U>
double max_residual_enumerated(U modulus, U start, U step, int64_t count, int shift,
                               RoundingMode mode) {
  const U half = modulus >> 1;
  U t = start;
  // Track the best residual in lattice units as a signed value.
  bool any_below = false;
  U best_below = 0;       // largest t < half
  U best_above = 0;       // largest t > half (residual t - modulus)
  bool tie = false;
  for (int64_t k = 0; k < count; ++k) {
    if (t < half) {
      if (!any_below || t > best_below) best_below = t;
      any_below = true;
    } else if (t == half) {
      tie = true;
    } else if (t > best_above) {
      best_above = t;
    }
    t += step;
    if (t >= modulus) t -= modulus;
  }
  // A tie rounds up under half-up (residual -1/2); under half-even it may
  // round down, giving residual +1/2.
  if (tie && mode == RoundingMode::kHalfEven) return 0.5;
  if (any_below) return std::ldexp(static_cast<double>(best_below), -shift);
  if (best_above > 0) return std::ldexp(static_cast<double>(best_above), -shift) - 1.0;
  return -0.5;
}

}  // namespace

Requantizer::Requantizer(double factor, int64_t zero_point) : factor_(factor), zero_point_(zero_point) {
  if (!std::isfinite(factor) || factor < 0.0)
    throw std::invalid_argument("requantization factor must be finite and non-negative");
  if (factor == 0.0) {
    mantissa_ = 0;
    shift_ = 0;
    return;
  }
  int exp = 0;
  const double frac = std::frexp(factor, &exp);  // factor = frac * 2^exp, frac in [0.5, 1)
  int64_t m = static_cast<int64_t>(std::ldexp(frac, 53));
  int shift = 53 - exp;
  while ((m & 1) == 0) {
    m >>= 1;
    --shift;
  }
  if (shift < -10) throw std::invalid_argument("requantization factor too large");
  mantissa_ = m;
  shift_ = shift;
}

int64_t Requantizer::round(int64_t acc, RoundingMode mode) const {
  const i128 n = static_cast<i128>(mantissa_) * acc;
  if (shift_ <= 0) return to_int64(static_cast<i128>(zero_point_) + (n << (-shift_)));
  if (shift_ >= kHugeShift) return zero_point_;
  return to_int64(static_cast<i128>(zero_point_) + round_shifted(n, shift_, mode));
}

double Requantizer::residual(int64_t acc, RoundingMode mode) const {
  const i128 n = static_cast<i128>(mantissa_) * acc;
  if (shift_ <= 0) return 0.0;
  if (shift_ >= kHugeShift) return std::ldexp(static_cast<double>(n), -shift_);
  const i128 q = round_shifted(n, shift_, mode);
  return std::ldexp(static_cast<double>(n - (q << shift_)), -shift_);
}

RoundSlack round_slack(const Requantizer& rq, int64_t acc_lo, int64_t acc_hi, RoundingMode mode) {
  if (acc_lo > acc_hi) std::swap(acc_lo, acc_hi);
  double max_res = 0.0;
  const int shift = rq.shift();
  if (rq.mantissa() == 0 || shift <= 0) {
    max_res = 0.0;  // every pre-round value is an integer
  } else if (shift >= kHugeShift) {
    const double a = rq.residual(acc_lo, mode), b = rq.residual(acc_hi, mode);
    max_res = std::max(a, b);
  } else {
    const u128 modulus = u128{1} << shift;
    const i128 count = static_cast<i128>(acc_hi) - acc_lo + 1;
    if (static_cast<u128>(count) >= modulus) {
      // Every residue class is reached.
      max_res = mode == RoundingMode::kHalfEven ? 0.5 : 0.5 - std::ldexp(1.0, -shift);
    } else {
      if (count > kEnumerationCap)
        throw TieAnalysisError("accumulator range of " + std::to_string(static_cast<int64_t>(count)) +
                               " values is too wide for exact tie analysis");
      const i128 n0 = static_cast<i128>(rq.mantissa()) * acc_lo;
      const i128 mod_signed = static_cast<i128>(modulus);
      i128 start = n0 % mod_signed;
      if (start < 0) start += mod_signed;
      i128 step = static_cast<i128>(rq.mantissa()) % mod_signed;
      if (step < 0) step += mod_signed;
      if (shift <= 62)
        max_res = max_residual_enumerated<uint64_t>(static_cast<uint64_t>(modulus), static_cast<uint64_t>(start),
                                                    static_cast<uint64_t>(step), static_cast<int64_t>(count),
                                                    shift, mode);
      else
        max_res = max_residual_enumerated<u128>(modulus, static_cast<u128>(start), static_cast<u128>(step),
                                                static_cast<int64_t>(count), shift, mode);
    }
  }
  RoundSlack s;
  s.min_gap = 0.5 - max_res;
  s.eps = s.min_gap / 2.0;
  s.delta = s.min_gap / 4.0;
  return s;
}

double round_real(double v, RoundingMode mode) {
  if (mode == RoundingMode::kHalfUp) return std::floor(v + 0.5);
  const double fl = std::floor(v);
  const double diff = v - fl;
  if (diff > 0.5) return fl + 1.0;
  if (diff < 0.5) return fl;
  return std::fmod(fl, 2.0) == 0.0 ? fl : fl + 1.0;
}

int64_t clip(int64_t v, int64_t lo, int64_t hi) { return v < lo ? lo : (v > hi ? hi : v); }

int64_t quantize_scalar(double x, const QuantParams& qp, const DtypeBounds& bounds, RoundingMode mode) {
  const double q = round_real(x / qp.scale + static_cast<double>(qp.zero_point), mode);
  if (q <= static_cast<double>(bounds.lb)) return bounds.lb;
  if (q >= static_cast<double>(bounds.ub)) return bounds.ub;
  return static_cast<int64_t>(q);
}

int64_t checked_mul(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("accumulator overflow (multiply)");
  return r;
}

int64_t checked_add(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw OverflowError("accumulator overflow (add)");
  return r;
}

}  // namespace qnnv
