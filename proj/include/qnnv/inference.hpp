// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "qnnv/model.hpp"
#include "qnnv/network.hpp"
#include "qnnv/query.hpp"

namespace qnnv {

/// Clip(Round(x/s + z), lb, ub) per entry.
IntTensor quantize_input(std::span<const double> x, const QuantParams& qp, const DtypeBounds& bounds,
                         RoundingMode mode);

/// Integer values of one stage: for affine stages yhat1 (rounded), ymax
/// (after the lower clip) and out (after the upper clip); other stages only
/// fill `out`.
struct StageTrace {
  std::vector<int64_t> yhat1;
  std::vector<int64_t> ymax;
  std::vector<int64_t> out;
};

std::vector<int64_t> stage_forward(const Stage& stage, std::span<const int64_t> x, RoundingMode mode,
                                   StageTrace* trace = nullptr);

/// Evaluates one layer exactly. Accumulators use checked 64-bit arithmetic
/// and throw OverflowError instead of wrapping.
IntTensor layer_forward(const Layer& layer, const IntTensor& x, RoundingMode mode);

std::vector<int64_t> forward(const Network& net, std::span<const int64_t> x);
std::vector<int64_t> forward(const QuantModel& model, const IntTensor& x);

/// Every intermediate value, one entry per stage.
std::vector<StageTrace> forward_trace(const Network& net, std::span<const int64_t> x);

/// Index of the largest logit; ties go to the smallest index.
int64_t argmax_lowest(std::span<const int64_t> logits);

int64_t predict(const Network& net, std::span<const int64_t> x);
int64_t predict(const QuantModel& model, const IntTensor& x);

/// True iff x lies in the query ball, inside the input bounds, and is
/// classified differently from the query label.
bool validate_counterexample(const Network& net, const RobustnessQuery& query,
                             std::span<const int64_t> x);
bool validate_counterexample(const QuantModel& model, const RobustnessQuery& query, const IntTensor& x);

}  // namespace qnnv
