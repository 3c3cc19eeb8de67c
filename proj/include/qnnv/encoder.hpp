// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qnnv/ilp_model.hpp"
#include "qnnv/interval.hpp"
#include "qnnv/network.hpp"
#include "qnnv/query.hpp"

namespace qnnv {

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bounds of a variable or the point interval of a constant.
Interval operand_bounds(const ILPModel& m, Operand op);

/// Big-M constant covering every difference between the given ranges.
double big_m(std::span<const Interval> ranges);

/// z = max(x, y) with the six-constraint big-M gadget and fresh binaries
/// `<name>.bx`, `<name>.by`. Constant arguments are substituted in place;
/// max of two constants folds to a constant. `z_hint` optionally tightens
/// the bounds of z; `M` overrides the computed big-M.
Operand encode_max(ILPModel& m, const std::string& name, Operand x, Operand y,
                   std::optional<Interval> z_hint = std::nullopt, std::optional<double> M = std::nullopt);
Operand encode_min(ILPModel& m, const std::string& name, Operand x, Operand y,
                   std::optional<Interval> z_hint = std::nullopt, std::optional<double> M = std::nullopt);

/// One integer variable x<i> per input with bounds
/// [max(lb, x*_i - r), min(ub, x*_i + r)].
std::vector<int> encode_input(ILPModel& m, const Network& net, const RobustnessQuery& query);

/// yhat1 of one neuron via the constraint pair
///   yhat1 - yhat0 <= 0.5 + delta,  yhat0 - yhat1 <= 0.5 - eps
/// with yhat0 = z_y + f * (sum_i w_i (x_i - z_x) + b_acc) substituted.
/// Folds to a constant when every input is constant.
Operand encode_affine_round(ILPModel& m, const std::string& name, const AffineNeuron& neuron,
                            int64_t input_zero_point, std::span<const Operand> inputs, Interval bounds,
                            const RoundSlack& slack);

/// Clip(yhat1, lbc, ubc) as Encode_max(ymax, yhat1, lbc) then
/// Encode_min(out, ymax, ubc). With `use_phases`, bounds of yhat1 that prove
/// a phase replace the gadget: always-lb/always-ub give the constant,
/// always-linear a single equality, and a half whose side can never win is
/// dropped.
Operand encode_clip(ILPModel& m, const std::string& prefix, const std::string& out_name, Operand yhat1,
                    int64_t lbc, int64_t ubc, bool use_phases, std::optional<Interval> ymax_hint = std::nullopt,
                    std::optional<Interval> out_hint = std::nullopt);

/// o_t >= o_label + 1 when t > label, o_t >= o_label otherwise (ties go to
/// the lower index).
void encode_misclassification(ILPModel& m, std::span<const Operand> logits, int64_t label, int64_t target);

struct EncodeOptions {
  bool use_phases = false;
};

struct NetworkEncoding {
  ILPModel model;
  std::vector<int> inputs;
  std::vector<Operand> logits;
};

/// Whole network over the query ball, without the misclassification row.
/// Variable bounds come from `bounds` (structural or analyzed).
NetworkEncoding encode_network(const Network& net, const RobustnessQuery& query, const BoundsTable& bounds,
                               const EncodeOptions& opts = {});

struct TargetILP {
  int64_t target = 0;
  ILPModel model;
  std::vector<int> inputs;
};

/// One feasibility ILP per target. `targets` defaults to every label other
/// than the query label.
std::vector<TargetILP> encode_query(const Network& net, const RobustnessQuery& query, const BoundsTable& bounds,
                                    const EncodeOptions& opts = {},
                                    std::optional<std::vector<int64_t>> targets = std::nullopt);

}  // namespace qnnv
