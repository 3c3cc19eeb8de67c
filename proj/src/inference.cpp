// SPDX-License-Identifier: Apache-2.0
#include "qnnv/inference.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace qnnv {

void check_query(const QuantModel& model, const RobustnessQuery& query) {
  if (static_cast<int64_t>(query.center.size()) != model.input_size())
    throw std::invalid_argument("query center has " + std::to_string(query.center.size()) +
                                " entries, model expects " + std::to_string(model.input_size()));
  for (int64_t v : query.center.data)
    if (!model.input_bounds.contains(v)) throw std::invalid_argument("query center outside input bounds");
  if (query.label < 0 || query.label >= model.num_classes)
    throw std::invalid_argument("query label out of range");
  if (query.radius < 0) throw std::invalid_argument("query radius must be non-negative");
}

IntTensor quantize_input(std::span<const double> x, const QuantParams& qp, const DtypeBounds& bounds,
                         RoundingMode mode) {
  std::vector<int64_t> q(x.size());
  for (size_t i = 0; i < x.size(); ++i) q[i] = quantize_scalar(x[i], qp, bounds, mode);
  return IntTensor(std::move(q));
}

std::vector<int64_t> stage_forward(const Stage& stage, std::span<const int64_t> x, RoundingMode mode,
                                   StageTrace* trace) {
  std::vector<int64_t> out;
  if (const auto* a = std::get_if<AffineStage>(&stage)) {
    const size_t n = a->neurons.size();
    out.resize(n);
    if (trace) {
      trace->yhat1.resize(n);
      trace->ymax.resize(n);
    }
    for (size_t j = 0; j < n; ++j) {
      const AffineNeuron& neuron = a->neurons[j];
      int64_t acc = neuron.bias_acc;
      for (const AccTerm& t : neuron.terms)
        acc = checked_add(acc, checked_mul(t.weight, x[t.input] - a->input_zero_point));
      const int64_t y1 = neuron.requant.round(acc, mode);
      const int64_t ymax = std::max(y1, a->clip_lb);
      out[j] = std::min(ymax, a->clip_ub);
      if (trace) {
        trace->yhat1[j] = y1;
        trace->ymax[j] = ymax;
      }
    }
  } else if (const auto* p = std::get_if<MaxPoolStage>(&stage)) {
    out.resize(p->windows.size());
    for (size_t j = 0; j < p->windows.size(); ++j) {
      int64_t m = x[p->windows[j].front()];
      for (int32_t i : p->windows[j]) m = std::max(m, x[i]);
      out[j] = m;
    }
  } else {
    const auto& r = std::get<ReluStage>(stage);
    out.resize(x.size());
    for (size_t j = 0; j < x.size(); ++j) out[j] = std::max(x[j], r.zero_point);
  }
  if (trace) trace->out = out;
  return out;
}

IntTensor layer_forward(const Layer& layer, const IntTensor& x, RoundingMode mode) {
  if (static_cast<int64_t>(x.size()) != layer_input_size(layer))
    throw std::invalid_argument("layer_forward: input size mismatch");
  return IntTensor(layer_output_shape(layer), stage_forward(lower_layer(layer), x.data, mode));
}

std::vector<int64_t> forward(const Network& net, std::span<const int64_t> x) {
  if (static_cast<int64_t>(x.size()) != net.input_size)
    throw std::invalid_argument("forward: input size mismatch");
  std::vector<int64_t> cur(x.begin(), x.end());
  for (const Stage& stage : net.stages) cur = stage_forward(stage, cur, net.rounding);
  return cur;
}

std::vector<int64_t> forward(const QuantModel& model, const IntTensor& x) {
  return forward(lower(model), x.data);
}

std::vector<StageTrace> forward_trace(const Network& net, std::span<const int64_t> x) {
  std::vector<StageTrace> traces(net.stages.size());
  std::vector<int64_t> cur(x.begin(), x.end());
  for (size_t k = 0; k < net.stages.size(); ++k) cur = stage_forward(net.stages[k], cur, net.rounding, &traces[k]);
  return traces;
}

int64_t argmax_lowest(std::span<const int64_t> logits) {
  if (logits.empty()) throw std::invalid_argument("argmax of empty logits");
  // max_element returns the first maximal element.
  return std::max_element(logits.begin(), logits.end()) - logits.begin();
}

int64_t predict(const Network& net, std::span<const int64_t> x) { return argmax_lowest(forward(net, x)); }

int64_t predict(const QuantModel& model, const IntTensor& x) { return predict(lower(model), x.data); }

bool validate_counterexample(const Network& net, const RobustnessQuery& query, std::span<const int64_t> x) {
  if (x.size() != query.center.size() || static_cast<int64_t>(x.size()) != net.input_size) return false;
  for (size_t i = 0; i < x.size(); ++i) {
    if (std::llabs(x[i] - query.center.data[i]) > query.radius) return false;
    if (!net.input_bounds.contains(x[i])) return false;
  }
  return predict(net, x) != query.label;
}

bool validate_counterexample(const QuantModel& model, const RobustnessQuery& query, const IntTensor& x) {
  return validate_counterexample(lower(model), query, x.data);
}

}  // namespace qnnv
