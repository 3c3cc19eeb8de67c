// SPDX-License-Identifier: Apache-2.0
#include "qnnv/interval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace qnnv {

namespace {

// Slack applied before snapping a box to integers; absorbs floating-point
// error of the bound computation.
constexpr double kIntTol = 1e-7;

Interval snap_int(Interval b) {
  return {std::ceil(b.lo - kIntTol), std::floor(b.hi + kIntTol)};
}

Interval widen(Interval b) {
  return {b.lo - 1e-9 * (1.0 + std::abs(b.lo)), b.hi + 1e-9 * (1.0 + std::abs(b.hi))};
}

Interval intersect(Interval a, Interval b) {
  Interval r{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
  // Symbolic and interval arithmetic can disagree by rounding noise only.
  if (r.lo > r.hi) r.lo = r.hi = 0.5 * (r.lo + r.hi);
  return r;
}

AffineBound constant_bound(size_t n, double c) { return {std::vector<double>(n, 0.0), c}; }

AffineBound scaled(const AffineBound& b, double k, double add) {
  AffineBound r{b.coeffs, b.constant * k + add};
  for (double& c : r.coeffs) c *= k;
  return r;
}

void axpy(AffineBound& acc, double k, const AffineBound& b) {
  for (size_t i = 0; i < acc.coeffs.size(); ++i) acc.coeffs[i] += k * b.coeffs[i];
  acc.constant += k * b.constant;
}

// ReLU(v) with the triangle relaxation: chord above, lambda * v below.
NeuronState relu_of(const NeuronState& v, std::span<const Interval> input_box) {
  const double l = v.box.lo, u = v.box.hi;
  const size_t n = input_box.size();
  if (l >= 0.0) return v;
  if (u <= 0.0) return {constant_bound(n, 0.0), constant_bound(n, 0.0), {0.0, 0.0}};
  NeuronState r;
  const double slope = u / (u - l);
  r.upper = scaled(v.upper, slope, -slope * l);
  r.lower = u >= -l ? v.lower : constant_bound(n, 0.0);
  r.box = intersect({0.0, u}, {std::max(0.0, concretize_min(r.lower, input_box)),
                               concretize_max(r.upper, input_box)});
  return r;
}

// c - v
NeuronState negate_shift(const NeuronState& v, double c) {
  return {scaled(v.upper, -1.0, c), scaled(v.lower, -1.0, c), {c - v.box.hi, c - v.box.lo}};
}

RoundSlack slack_for(const AffineNeuron& neuron, int64_t zx, std::span<const Interval> box,
                     RoundingMode mode) {
  const auto [lo, hi] = accumulator_range(neuron, zx, box);
  return round_slack(neuron.requant, lo, hi, mode);
}

}  // namespace

double AffineBound::eval(std::span<const double> x) const {
  double v = constant;
  for (size_t i = 0; i < coeffs.size(); ++i) v += coeffs[i] * x[i];
  return v;
}

std::string phase_name(Phase p) {
  switch (p) {
    case Phase::kAlwaysLb: return "always-lb";
    case Phase::kAlwaysUb: return "always-ub";
    case Phase::kAlwaysLinear: return "always-linear";
    default: return "unknown";
  }
}

Phase classify_clip(const Interval& box, double lbc, double ubc) {
  if (box.hi <= lbc) return Phase::kAlwaysLb;
  if (box.lo >= ubc) return Phase::kAlwaysUb;
  if (box.lo >= lbc && box.hi <= ubc) return Phase::kAlwaysLinear;
  return Phase::kUnknown;
}

double concretize_min(const AffineBound& b, std::span<const Interval> box) {
  double v = b.constant;
  for (size_t i = 0; i < b.coeffs.size(); ++i) v += b.coeffs[i] * (b.coeffs[i] >= 0 ? box[i].lo : box[i].hi);
  return v;
}

double concretize_max(const AffineBound& b, std::span<const Interval> box) {
  double v = b.constant;
  for (size_t i = 0; i < b.coeffs.size(); ++i) v += b.coeffs[i] * (b.coeffs[i] >= 0 ? box[i].hi : box[i].lo);
  return v;
}

AbstractState input_state(std::vector<Interval> box) {
  AbstractState s;
  const size_t n = box.size();
  s.neurons.resize(n);
  for (size_t i = 0; i < n; ++i) {
    AffineBound e = constant_bound(n, 0.0);
    e.coeffs[i] = 1.0;
    s.neurons[i] = {e, e, box[i]};
  }
  s.input_box = std::move(box);
  return s;
}

AbstractState propagate_affine(const AbstractState& state, const AffineStage& stage) {
  AbstractState out;
  out.input_box = state.input_box;
  const size_t n = state.input_box.size();
  out.neurons.reserve(stage.neurons.size());
  const double zx = static_cast<double>(stage.input_zero_point);
  for (const AffineNeuron& neuron : stage.neurons) {
    const double f = neuron.requant.factor();
    double base = static_cast<double>(neuron.requant.zero_point()) + f * static_cast<double>(neuron.bias_acc);
    NeuronState ns{constant_bound(n, 0.0), constant_bound(n, 0.0), {0.0, 0.0}};
    Interval box{0.0, 0.0};
    for (const AccTerm& t : neuron.terms) {
      const double c = f * static_cast<double>(t.weight);
      base -= c * zx;
      const NeuronState& in = state.neurons[t.input];
      if (c >= 0) {
        axpy(ns.lower, c, in.lower);
        axpy(ns.upper, c, in.upper);
        box.lo += c * in.box.lo;
        box.hi += c * in.box.hi;
      } else {
        axpy(ns.lower, c, in.upper);
        axpy(ns.upper, c, in.lower);
        box.lo += c * in.box.hi;
        box.hi += c * in.box.lo;
      }
    }
    ns.lower.constant += base;
    ns.upper.constant += base;
    box.lo += base;
    box.hi += base;
    const Interval sym{concretize_min(ns.lower, out.input_box), concretize_max(ns.upper, out.input_box)};
    ns.box = widen(intersect(box, sym));
    out.neurons.push_back(std::move(ns));
  }
  return out;
}

AbstractState propagate_round(const AbstractState& state, std::span<const double> eps) {
  if (eps.size() != state.size()) throw std::invalid_argument("propagate_round: one eps per neuron required");
  AbstractState out = state;
  for (size_t j = 0; j < out.size(); ++j) {
    NeuronState& ns = out.neurons[j];
    ns.lower.constant += eps[j] - 0.5;
    ns.upper.constant += 0.5;
    ns.box = snap_int({ns.box.lo + eps[j] - 0.5, ns.box.hi + 0.5});
  }
  return out;
}

AbstractState propagate_relu(const AbstractState& state, int64_t c, std::vector<Phase>* phases) {
  AbstractState out;
  out.input_box = state.input_box;
  const double cd = static_cast<double>(c);
  if (phases) phases->clear();
  for (const NeuronState& v : state.neurons) {
    // c + ReLU(v - c)
    NeuronState shifted{scaled(v.lower, 1.0, -cd), scaled(v.upper, 1.0, -cd), {v.box.lo - cd, v.box.hi - cd}};
    NeuronState r = relu_of(shifted, state.input_box);
    NeuronState y{scaled(r.lower, 1.0, cd), scaled(r.upper, 1.0, cd), {r.box.lo + cd, r.box.hi + cd}};
    y.box = snap_int(intersect(y.box, {std::max(v.box.lo, cd), std::max(v.box.hi, cd)}));
    if (phases) {
      Phase p = Phase::kUnknown;
      if (v.box.hi <= cd) p = Phase::kAlwaysLb;
      else if (v.box.lo >= cd) p = Phase::kAlwaysLinear;
      phases->push_back(p);
    }
    out.neurons.push_back(std::move(y));
  }
  return out;
}

ClipResult propagate_clip(const AbstractState& state, int64_t lbc, int64_t ubc) {
  if (lbc > ubc) throw std::invalid_argument("propagate_clip: lower clip bound exceeds upper");
  ClipResult res;
  res.max_state = propagate_relu(state, lbc);
  res.out.input_box = state.input_box;
  const double ud = static_cast<double>(ubc);
  for (size_t j = 0; j < state.size(); ++j) {
    const NeuronState& m = res.max_state.neurons[j];
    // ubc - ReLU(ubc - m)
    NeuronState r = relu_of(negate_shift(m, ud), state.input_box);
    NeuronState y = negate_shift(r, ud);
    y.box = snap_int(intersect(y.box, {std::min(m.box.lo, ud), std::min(m.box.hi, ud)}));
    res.out.neurons.push_back(std::move(y));
    res.phases.push_back(classify_clip(state.neurons[j].box, static_cast<double>(lbc), ud));
  }
  return res;
}

AbstractState propagate_maxpool(const AbstractState& state, const MaxPoolStage& stage) {
  AbstractState out;
  out.input_box = state.input_box;
  const size_t n = state.input_box.size();
  for (const auto& window : stage.windows) {
    Interval box{-INFINITY, -INFINITY};
    for (int32_t i : window) {
      box.lo = std::max(box.lo, state.neurons[i].box.lo);
      box.hi = std::max(box.hi, state.neurons[i].box.hi);
    }
    out.neurons.push_back({constant_bound(n, box.lo), constant_bound(n, box.hi), box});
  }
  return out;
}

std::vector<Interval> query_input_box(const Network& net, const RobustnessQuery& query) {
  std::vector<Interval> box(query.center.size());
  for (size_t i = 0; i < box.size(); ++i) {
    const int64_t c = query.center.data[i];
    box[i] = {static_cast<double>(std::max(net.input_bounds.lb, c - query.radius)),
              static_cast<double>(std::min(net.input_bounds.ub, c + query.radius))};
  }
  return box;
}

std::pair<int64_t, int64_t> accumulator_range(const AffineNeuron& neuron, int64_t input_zero_point,
                                              std::span<const Interval> input_box) {
  int64_t lo = neuron.bias_acc, hi = neuron.bias_acc;
  for (const AccTerm& t : neuron.terms) {
    const int64_t a = static_cast<int64_t>(input_box[t.input].lo) - input_zero_point;
    const int64_t b = static_cast<int64_t>(input_box[t.input].hi) - input_zero_point;
    const int64_t p = checked_mul(t.weight, a), q = checked_mul(t.weight, b);
    lo = checked_add(lo, std::min(p, q));
    hi = checked_add(hi, std::max(p, q));
  }
  return {lo, hi};
}

AnalysisResult analyze(const Network& net, const RobustnessQuery& query) {
  AnalysisResult res;
  res.bounds.from_symbolic = true;
  res.bounds.input = query_input_box(net, query);
  AbstractState state = input_state(res.bounds.input);
  for (const Stage& stage : net.stages) {
    StageBounds sb;
    std::vector<Interval> in_box(state.size());
    for (size_t i = 0; i < state.size(); ++i) in_box[i] = state.neurons[i].box;
    if (const auto* a = std::get_if<AffineStage>(&stage)) {
      std::vector<double> eps;
      for (const AffineNeuron& neuron : a->neurons) {
        sb.slack.push_back(slack_for(neuron, a->input_zero_point, in_box, net.rounding));
        eps.push_back(sb.slack.back().eps);
      }
      const AbstractState rounded = propagate_round(propagate_affine(state, *a), eps);
      ClipResult clip = propagate_clip(rounded, a->clip_lb, a->clip_ub);
      for (size_t j = 0; j < rounded.size(); ++j) {
        sb.yhat1.push_back(rounded.neurons[j].box);
        sb.ymax.push_back(clip.max_state.neurons[j].box);
        sb.out.push_back(clip.out.neurons[j].box);
      }
      sb.phase = std::move(clip.phases);
      state = std::move(clip.out);
    } else if (const auto* p = std::get_if<MaxPoolStage>(&stage)) {
      state = propagate_maxpool(state, *p);
      for (const auto& ns : state.neurons) sb.out.push_back(ns.box);
      sb.phase.assign(state.size(), Phase::kUnknown);
    } else {
      const auto& r = std::get<ReluStage>(stage);
      state = propagate_relu(state, r.zero_point, &sb.phase);
      for (const auto& ns : state.neurons) sb.out.push_back(ns.box);
    }
    res.bounds.stages.push_back(std::move(sb));
  }

  const size_t m = state.size();
  const auto label = static_cast<size_t>(query.label);
  res.max_logit_gap.assign(m, 0.0);
  for (size_t t = 0; t < m; ++t) {
    if (t == label) continue;
    AffineBound diff = state.neurons[t].upper;
    axpy(diff, -1.0, state.neurons[label].lower);
    const double gap = std::min(concretize_max(diff, state.input_box),
                                state.neurons[t].box.hi - state.neurons[label].box.lo);
    res.max_logit_gap[t] = gap;
    // Logits are integers: o_t - o_label <= floor(gap).
    const double g = std::floor(gap + kIntTol);
    const bool ruled_out = t > label ? g <= 0.0 : g <= -1.0;
    if (!ruled_out) res.open_targets.push_back(static_cast<int64_t>(t));
  }
  res.verdict = res.open_targets.empty() ? IntervalVerdict::kRobust : IntervalVerdict::kInconclusive;
  res.logits = std::move(state);
  return res;
}

BoundsTable structural_bounds(const Network& net, const RobustnessQuery& query) {
  BoundsTable table;
  table.input = query_input_box(net, query);
  std::vector<Interval> cur = table.input;
  for (const Stage& stage : net.stages) {
    StageBounds sb;
    if (const auto* a = std::get_if<AffineStage>(&stage)) {
      for (const AffineNeuron& neuron : a->neurons) {
        const auto [lo, hi] = accumulator_range(neuron, a->input_zero_point, cur);
        sb.slack.push_back(round_slack(neuron.requant, lo, hi, net.rounding));
        const Interval y1{static_cast<double>(neuron.requant.round(lo, net.rounding)),
                          static_cast<double>(neuron.requant.round(hi, net.rounding))};
        const Interval ymax{std::max(y1.lo, static_cast<double>(a->clip_lb)),
                            std::max(y1.hi, static_cast<double>(a->clip_lb))};
        sb.yhat1.push_back(y1);
        sb.ymax.push_back(ymax);
        sb.out.push_back({std::min(ymax.lo, static_cast<double>(a->clip_ub)),
                          std::min(ymax.hi, static_cast<double>(a->clip_ub))});
      }
    } else if (const auto* p = std::get_if<MaxPoolStage>(&stage)) {
      for (const auto& window : p->windows) {
        Interval box{-INFINITY, -INFINITY};
        for (int32_t i : window) box = {std::max(box.lo, cur[i].lo), std::max(box.hi, cur[i].hi)};
        sb.out.push_back(box);
      }
    } else {
      const double z = static_cast<double>(std::get<ReluStage>(stage).zero_point);
      for (const Interval& b : cur) sb.out.push_back({std::max(b.lo, z), std::max(b.hi, z)});
    }
    sb.phase.assign(sb.out.size(), Phase::kUnknown);
    cur = sb.out;
    table.stages.push_back(std::move(sb));
  }
  return table;
}

std::string bounds_to_json(const Network& net, const BoundsTable& table) {
  nlohmann::ordered_json j;
  for (size_t i = 0; i < table.input.size(); ++i) j[input_var_name(i)] = {table.input[i].lo, table.input[i].hi};
  for (size_t k = 0; k < table.stages.size(); ++k) {
    const StageBounds& sb = table.stages[k];
    const Stage& stage = net.stages[k];
    const bool affine = std::holds_alternative<AffineStage>(stage);
    const bool fused = affine && std::get<AffineStage>(stage).relu_fused;
    for (size_t n = 0; n < sb.out.size(); ++n) {
      if (affine) {
        j[neuron_var_name(k, n, "yhat1")] = {sb.yhat1[n].lo, sb.yhat1[n].hi};
        j[neuron_var_name(k, n, "ymax")] = {sb.ymax[n].lo, sb.ymax[n].hi};
      }
      const std::string what = affine ? (fused ? "yq" : "y2") : (std::holds_alternative<ReluStage>(stage) ? "yq" : "pool");
      j[neuron_var_name(k, n, what)] = {sb.out[n].lo, sb.out[n].hi};
    }
  }
  return j.dump(1);
}

}  // namespace qnnv
