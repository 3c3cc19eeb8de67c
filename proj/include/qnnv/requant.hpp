// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>

#include "qnnv/model.hpp"

namespace qnnv {

class OverflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the accumulator range of a neuron is too wide to bound the
/// distance between pre-round values and rounding ties exactly.
class TieAnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maps an integer accumulator to the requantized integer
///   Round(z_y + f * acc)
/// where f is the double-precision factor. The product f * acc is evaluated
/// exactly (f is a dyadic rational), so rounding never depends on the
/// floating-point error of the multiply.
class Requantizer {
 public:
  Requantizer() = default;
  Requantizer(double factor, int64_t zero_point);

  double factor() const { return factor_; }
  int64_t zero_point() const { return zero_point_; }

  /// z_y + f * acc in double precision; for bounds and display only.
  double pre_round(int64_t acc) const {
    return static_cast<double>(zero_point_) + factor_ * static_cast<double>(acc);
  }

  /// Exact Round(z_y + f * acc).
  int64_t round(int64_t acc, RoundingMode mode) const;

  /// Exact value of (z_y + f*acc) - Round(z_y + f*acc) in double.
  double residual(int64_t acc, RoundingMode mode) const;

  // factor = mantissa * 2^-shift, mantissa odd (or 0 when the factor is 0)
  int64_t mantissa() const { return mantissa_; }
  int shift() const { return shift_; }

 private:
  double factor_ = 1.0;
  int64_t zero_point_ = 0;
  int64_t mantissa_ = 1;
  int shift_ = 0;
};

/// Margins that make the two-inequality rounding encoding exact over a range
/// of accumulators [acc_lo, acc_hi]:
///   yhat1 - yhat0 <= 0.5 + delta,   yhat0 - yhat1 <= 0.5 - eps.
/// `min_gap` is the exact smallest distance from a reachable pre-round value
/// up to the next rounding tie (0.5 - max residual). eps = min_gap/2 and
/// delta = min_gap/4, so exactly one integer satisfies both inequalities for
/// every reachable accumulator.
struct RoundSlack {
  double min_gap = 0.5;
  double eps = 0.25;
  double delta = 0.125;
};

/// Enumerates the accumulator range (closed form when it covers every
/// residue). Throws TieAnalysisError when the range exceeds 2^27 values and
/// has no closed form.
RoundSlack round_slack(const Requantizer& rq, int64_t acc_lo, int64_t acc_hi, RoundingMode mode);

/// Round half-up / half-even of a double, used for real-valued quantization.
double round_real(double v, RoundingMode mode);

/// Clip(Round(x/s + z), lb, ub).
int64_t quantize_scalar(double x, const QuantParams& qp, const DtypeBounds& bounds,
                        RoundingMode mode);

int64_t clip(int64_t v, int64_t lo, int64_t hi);

/// Checked 64-bit helpers; throw OverflowError instead of wrapping.
int64_t checked_mul(int64_t a, int64_t b);
int64_t checked_add(int64_t a, int64_t b);

}  // namespace qnnv
