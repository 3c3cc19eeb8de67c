// SPDX-License-Identifier: Apache-2.0
#include "qnnv/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace qnnv {

namespace {

// Below this margin the double coefficients of the rounding rows can no
// longer separate the correct integer from its neighbour.
constexpr double kMinDelta = 1e-9;

struct RowBuilder {
  std::vector<LinTerm> terms;
  double shift = 0.0;  // constant part of the left-hand side

  RowBuilder& add(Operand op, double coeff) {
    if (op.is_const()) shift += coeff * static_cast<double>(op.value);
    else terms.push_back({op.var, coeff});
    return *this;
  }
  RowBuilder& add(int var, double coeff) {
    terms.push_back({var, coeff});
    return *this;
  }
  void emit(ILPModel& m, Cmp cmp, double rhs) { m.add_constraint(std::move(terms), cmp, rhs - shift); }
};

Interval intersect_hint(Interval b, const std::optional<Interval>& hint) {
  if (!hint) return b;
  const Interval r{std::max(b.lo, hint->lo), std::min(b.hi, hint->hi)};
  return r.lo <= r.hi ? r : b;
}

std::string stage_prefix(size_t k, size_t j) { return neuron_var_name(k, j, ""); }

}  // namespace

Interval operand_bounds(const ILPModel& m, Operand op) {
  if (op.is_const()) return {static_cast<double>(op.value), static_cast<double>(op.value)};
  const Var& v = m.var(op.var);
  return {v.lo, v.hi};
}

double big_m(std::span<const Interval> ranges) {
  if (ranges.empty()) return std::ldexp(1.0, 20);
  double lo = ranges[0].lo, hi = ranges[0].hi;
  for (const Interval& r : ranges) {
    lo = std::min(lo, r.lo);
    hi = std::max(hi, r.hi);
  }
  return hi - lo + 1.0;
}

Operand encode_max(ILPModel& m, const std::string& name, Operand x, Operand y, std::optional<Interval> z_hint,
                   std::optional<double> M) {
  const Interval bx_r = operand_bounds(m, x), by_r = operand_bounds(m, y);
  const Interval zb = intersect_hint({std::max(bx_r.lo, by_r.lo), std::max(bx_r.hi, by_r.hi)}, z_hint);
  const Interval ranges[] = {bx_r, by_r, zb};
  const double bigm = M ? *M : big_m(ranges);
  const Operand z = Operand::variable(m.add_var(name, VarKind::kInteger, zb.lo, zb.hi));
  const int bx = m.add_var(name + ".bx", VarKind::kBinary, 0, 1);
  const int by = m.add_var(name + ".by", VarKind::kBinary, 0, 1);
  RowBuilder().add(bx, 1).add(by, 1).emit(m, Cmp::kEq, 1);
  RowBuilder().add(x, 1).add(z, -1).emit(m, Cmp::kLe, 0);
  RowBuilder().add(y, 1).add(z, -1).emit(m, Cmp::kLe, 0);
  RowBuilder().add(x, 1).add(z, -1).add(by, bigm).emit(m, Cmp::kGe, 0);
  RowBuilder().add(y, 1).add(z, -1).add(bx, bigm).emit(m, Cmp::kGe, 0);
  RowBuilder().add(y, 1).add(x, -1).add(bx, bigm).emit(m, Cmp::kGe, 0);
  return z;
}

Operand encode_min(ILPModel& m, const std::string& name, Operand x, Operand y, std::optional<Interval> z_hint,
                   std::optional<double> M) {
  const Interval bx_r = operand_bounds(m, x), by_r = operand_bounds(m, y);
  const Interval zb = intersect_hint({std::min(bx_r.lo, by_r.lo), std::min(bx_r.hi, by_r.hi)}, z_hint);
  const Interval ranges[] = {bx_r, by_r, zb};
  const double bigm = M ? *M : big_m(ranges);
  const Operand z = Operand::variable(m.add_var(name, VarKind::kInteger, zb.lo, zb.hi));
  const int bx = m.add_var(name + ".bx", VarKind::kBinary, 0, 1);
  const int by = m.add_var(name + ".by", VarKind::kBinary, 0, 1);
  RowBuilder().add(bx, 1).add(by, 1).emit(m, Cmp::kEq, 1);
  RowBuilder().add(z, 1).add(x, -1).emit(m, Cmp::kLe, 0);
  RowBuilder().add(z, 1).add(y, -1).emit(m, Cmp::kLe, 0);
  RowBuilder().add(x, 1).add(z, -1).add(by, -bigm).emit(m, Cmp::kLe, 0);
  RowBuilder().add(y, 1).add(z, -1).add(bx, -bigm).emit(m, Cmp::kLe, 0);
  RowBuilder().add(y, 1).add(x, -1).add(bx, -bigm).emit(m, Cmp::kLe, 0);
  return z;
}

std::vector<int> encode_input(ILPModel& m, const Network& net, const RobustnessQuery& query) {
  const std::vector<Interval> box = query_input_box(net, query);
  std::vector<int> ids;
  ids.reserve(box.size());
  for (size_t i = 0; i < box.size(); ++i) ids.push_back(m.add_var(input_var_name(i), VarKind::kInteger, box[i].lo, box[i].hi));
  return ids;
}

Operand encode_affine_round(ILPModel& m, const std::string& name, const AffineNeuron& neuron,
                            int64_t input_zero_point, std::span<const Operand> inputs, Interval bounds,
                            const RoundSlack& slack) {
  // acc = K + sum_i w_i x_i over the variable inputs.
  int64_t k = neuron.bias_acc;
  std::map<int, int64_t> weights;
  for (const AccTerm& t : neuron.terms) {
    const Operand& in = inputs[t.input];
    if (in.is_const()) {
      k = checked_add(k, checked_mul(t.weight, in.value - input_zero_point));
    } else {
      k = checked_add(k, checked_mul(-t.weight, input_zero_point));
      weights[in.var] = checked_add(weights[in.var], t.weight);
    }
  }
  std::erase_if(weights, [](const auto& kv) { return kv.second == 0; });
  if (weights.empty()) return Operand::constant(neuron.requant.round(k, RoundingMode::kHalfUp));
  if (slack.delta < kMinDelta)
    throw TieAnalysisError(name + ": pre-round values come within " + std::to_string(slack.min_gap) +
                           " of a rounding tie");

  const double f = neuron.requant.factor();
  const double base = static_cast<double>(neuron.requant.zero_point()) + f * static_cast<double>(k);
  const int y1 = m.add_var(name, VarKind::kInteger, bounds.lo, bounds.hi);
  std::vector<LinTerm> upper{{y1, 1.0}}, lower{{y1, -1.0}};
  for (const auto& [var, w] : weights) {
    const double c = f * static_cast<double>(w);
    upper.push_back({var, -c});
    lower.push_back({var, c});
  }
  m.add_constraint(std::move(upper), Cmp::kLe, base + 0.5 + slack.delta);
  m.add_constraint(std::move(lower), Cmp::kLe, 0.5 - slack.eps - base);
  return Operand::variable(y1);
}

Operand encode_clip(ILPModel& m, const std::string& prefix, const std::string& out_name, Operand yhat1,
                    int64_t lbc, int64_t ubc, bool use_phases, std::optional<Interval> ymax_hint,
                    std::optional<Interval> out_hint) {
  if (lbc > ubc) throw EncodeError("clip lower bound exceeds upper bound");
  if (yhat1.is_const()) return Operand::constant(std::clamp(yhat1.value, lbc, ubc));
  const Interval b = operand_bounds(m, yhat1);
  const double lo = static_cast<double>(lbc), hi = static_cast<double>(ubc);
  if (!use_phases) {
    const Operand ymax = encode_max(m, prefix + "ymax", yhat1, Operand::constant(lbc), ymax_hint);
    return encode_min(m, prefix + out_name, ymax, Operand::constant(ubc), out_hint);
  }
  switch (classify_clip(b, lo, hi)) {
    case Phase::kAlwaysLb: return Operand::constant(lbc);
    case Phase::kAlwaysUb: return Operand::constant(ubc);
    case Phase::kAlwaysLinear: {
      const Interval ob = intersect_hint(b, out_hint);
      const int out = m.add_var(prefix + out_name, VarKind::kInteger, ob.lo, ob.hi);
      m.add_constraint({{out, 1.0}, {yhat1.var, -1.0}}, Cmp::kEq, 0.0);
      return Operand::variable(out);
    }
    default: break;
  }
  const Operand ymax = b.lo >= lo ? yhat1 : encode_max(m, prefix + "ymax", yhat1, Operand::constant(lbc), ymax_hint);
  if (operand_bounds(m, ymax).hi <= hi) return ymax;
  return encode_min(m, prefix + out_name, ymax, Operand::constant(ubc), out_hint);
}

void encode_misclassification(ILPModel& m, std::span<const Operand> logits, int64_t label, int64_t target) {
  if (target == label) throw EncodeError("target equals the query label");
  RowBuilder().add(logits[target], 1.0).add(logits[label], -1.0).emit(m, Cmp::kGe, target > label ? 1.0 : 0.0);
}

NetworkEncoding encode_network(const Network& net, const RobustnessQuery& query, const BoundsTable& bounds,
                               const EncodeOptions& opts) {
  if (net.rounding != RoundingMode::kHalfUp)
    throw EncodeError("the ILP encoding supports half-up rounding only (model uses half-even)");
  if (bounds.stages.size() != net.stages.size()) throw EncodeError("bounds table does not match the network");
  NetworkEncoding enc;
  ILPModel& m = enc.model;
  enc.inputs = encode_input(m, net, query);
  std::vector<Operand> cur;
  for (int id : enc.inputs) cur.push_back(Operand::variable(id));

  for (size_t k = 0; k < net.stages.size(); ++k) {
    const StageBounds& sb = bounds.stages[k];
    std::vector<Operand> next;
    if (const auto* a = std::get_if<AffineStage>(&net.stages[k])) {
      const std::string out_name = a->relu_fused ? "yq" : "y2";
      for (size_t j = 0; j < a->neurons.size(); ++j) {
        const std::string prefix = stage_prefix(k, j);
        const Operand y1 =
            encode_affine_round(m, prefix + "yhat1", a->neurons[j], a->input_zero_point, cur, sb.yhat1[j], sb.slack[j]);
        next.push_back(encode_clip(m, prefix, out_name, y1, a->clip_lb, a->clip_ub, opts.use_phases, sb.ymax[j],
                                   sb.out[j]));
      }
    } else if (const auto* r = std::get_if<ReluStage>(&net.stages[k])) {
      for (size_t j = 0; j < cur.size(); ++j) {
        const Operand x = cur[j];
        if (x.is_const()) {
          next.push_back(Operand::constant(std::max(x.value, r->zero_point)));
          continue;
        }
        const Interval b = operand_bounds(m, x);
        const double z = static_cast<double>(r->zero_point);
        if (opts.use_phases && b.lo >= z) next.push_back(x);
        else if (opts.use_phases && b.hi <= z) next.push_back(Operand::constant(r->zero_point));
        else next.push_back(encode_max(m, stage_prefix(k, j) + "yq", x, Operand::constant(r->zero_point), sb.out[j]));
      }
    } else {
      const auto& p = std::get<MaxPoolStage>(net.stages[k]);
      for (size_t j = 0; j < p.windows.size(); ++j) {
        std::vector<Operand> ops;
        std::optional<int64_t> cmax;
        for (int32_t i : p.windows[j]) {
          if (cur[i].is_const()) cmax = std::max(cmax.value_or(cur[i].value), cur[i].value);
          else if (std::none_of(ops.begin(), ops.end(), [&](Operand o) { return o.var == cur[i].var; }))
            ops.push_back(cur[i]);
        }
        if (cmax) ops.push_back(Operand::constant(*cmax));
        if (opts.use_phases && ops.size() > 1) {
          // Drop arguments that can never exceed another argument's floor.
          double floor_max = -INFINITY;
          for (Operand o : ops) floor_max = std::max(floor_max, operand_bounds(m, o).lo);
          std::vector<Operand> kept;
          for (Operand o : ops) {
            const Interval ob = operand_bounds(m, o);
            if (ob.hi > floor_max || ob.lo == floor_max) kept.push_back(o);
          }
          ops = kept;
        }
        if (ops.size() == 1) {
          next.push_back(ops[0]);
          continue;
        }
        const std::string prefix = stage_prefix(k, j);
        Operand acc = ops[0];
        for (size_t i = 1; i < ops.size(); ++i) {
          const bool last = i + 1 == ops.size();
          acc = encode_max(m, last ? prefix + "pool" : prefix + "pool.t" + std::to_string(i), acc, ops[i],
                           last ? std::optional<Interval>(sb.out[j]) : std::nullopt);
        }
        next.push_back(acc);
      }
    }
    cur = std::move(next);
  }
  enc.logits = std::move(cur);
  return enc;
}

std::vector<TargetILP> encode_query(const Network& net, const RobustnessQuery& query, const BoundsTable& bounds,
                                    const EncodeOptions& opts, std::optional<std::vector<int64_t>> targets) {
  if (!targets) {
    targets.emplace();
    for (int64_t t = 0; t < net.num_classes; ++t)
      if (t != query.label) targets->push_back(t);
  }
  const NetworkEncoding enc = encode_network(net, query, bounds, opts);
  std::vector<TargetILP> out;
  for (int64_t t : *targets) {
    TargetILP ilp{t, enc.model, enc.inputs};
    encode_misclassification(ilp.model, enc.logits, query.label, t);
    out.push_back(std::move(ilp));
  }
  return out;
}

}  // namespace qnnv
