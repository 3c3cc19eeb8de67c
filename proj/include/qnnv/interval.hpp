// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "qnnv/network.hpp"
#include "qnnv/query.hpp"
#include "qnnv/requant.hpp"

namespace qnnv {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  bool contains(const Interval& o) const { return o.lo >= lo && o.hi <= hi; }
  double width() const { return hi - lo; }
};

/// coeffs . x + constant over the network input variables.
struct AffineBound {
  std::vector<double> coeffs;
  double constant = 0.0;

  double eval(std::span<const double> x) const;
};

struct NeuronState {
  AffineBound lower;
  AffineBound upper;
  Interval box;
};

/// Symbolic lower/upper bounds plus a concrete box for every neuron of one
/// layer, all expressed over the input box.
struct AbstractState {
  std::vector<Interval> input_box;
  std::vector<NeuronState> neurons;

  size_t size() const { return neurons.size(); }
};

enum class Phase { kUnknown, kAlwaysLb, kAlwaysUb, kAlwaysLinear };
std::string phase_name(Phase p);

/// Phase of Clip(v, lbc, ubc) (or of max(v, lbc) when ubc is +inf) given
/// the box of v.
Phase classify_clip(const Interval& box, double lbc, double ubc);

/// Min / max of an affine bound over the input box.
double concretize_min(const AffineBound& b, std::span<const Interval> box);
double concretize_max(const AffineBound& b, std::span<const Interval> box);

AbstractState input_state(std::vector<Interval> box);

/// Pre-round values yhat0 = z_y + f * acc of an affine stage.
AbstractState propagate_affine(const AbstractState& state, const AffineStage& stage);

/// yhat1 in [yhat0 - 0.5 + eps_j, yhat0 + 0.5]; boxes tightened to integers.
AbstractState propagate_round(const AbstractState& state, std::span<const double> eps);

struct ClipResult {
  AbstractState max_state;  // lbc + ReLU(v - lbc)
  AbstractState out;        // ubc - ReLU(ubc - max_state)
  std::vector<Phase> phases;
};

/// Clip(v, lbc, ubc) simulated by two ReLUs. Throws std::invalid_argument if
/// lbc > ubc.
ClipResult propagate_clip(const AbstractState& state, int64_t lbc, int64_t ubc);

/// c + ReLU(v - c) for every neuron (the quantized ReLU max(v, c)).
AbstractState propagate_relu(const AbstractState& state, int64_t c, std::vector<Phase>* phases = nullptr);

/// Elementwise max of window boxes; symbolic bounds collapse to constants.
AbstractState propagate_maxpool(const AbstractState& state, const MaxPoolStage& stage);

/// Integer bounds for every encoder variable of one stage. yhat1/ymax/slack
/// are filled for affine stages only.
struct StageBounds {
  std::vector<Interval> yhat1;
  std::vector<Interval> ymax;
  std::vector<Interval> out;
  std::vector<Phase> phase;
  std::vector<RoundSlack> slack;
};

struct BoundsTable {
  std::vector<Interval> input;
  std::vector<StageBounds> stages;
  bool from_symbolic = false;  // false: plain interval arithmetic
};

enum class IntervalVerdict { kRobust, kInconclusive };

struct AnalysisResult {
  BoundsTable bounds;
  IntervalVerdict verdict = IntervalVerdict::kInconclusive;
  /// Upper bound on o_t - o_label for every class t (entry at label is 0).
  std::vector<double> max_logit_gap;
  /// Targets t != label that interval reasoning could not rule out.
  std::vector<int64_t> open_targets;
  /// Final symbolic state of the logits.
  AbstractState logits;
};

/// Box of the query ball intersected with the input dtype bounds.
std::vector<Interval> query_input_box(const Network& net, const RobustnessQuery& query);

/// Integer accumulator range of an affine neuron given integer input boxes.
std::pair<int64_t, int64_t> accumulator_range(const AffineNeuron& neuron, int64_t input_zero_point,
                                              std::span<const Interval> input_box);

/// Symbolic bound propagation over the whole network. A target t is ruled
/// out when o_t - o_label < 1 everywhere (t > label) or o_t - o_label < 0
/// everywhere (t < label), mirroring the lowest-index argmax. ROBUST iff
/// every target is ruled out.
AnalysisResult analyze(const Network& net, const RobustnessQuery& query);

/// Plain interval arithmetic from the query box (no symbolic bounds and no
/// phase information); the structural bounds used when the interval stage is
/// skipped.
BoundsTable structural_bounds(const Network& net, const RobustnessQuery& query);

/// Variable name -> [lo, hi] as JSON text, using the encoder's names.
std::string bounds_to_json(const Network& net, const BoundsTable& table);

}  // namespace qnnv
