// SPDX-License-Identifier: Apache-2.0
#include "qnnv/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "qnnv/inference.hpp"
#include "qnnv/interval.hpp"

namespace qnnv {

namespace {

double round_value(const DummyAffine& a, size_t j, double acc, RoundingMode mode) {
  // Integer accumulators take the exact requantization path so exact mode
  // matches integer inference bit for bit.
  if (acc == std::floor(acc) && std::abs(acc) < 0x1p53)
    return static_cast<double>(a.requant[j].round(static_cast<int64_t>(acc), mode));
  return round_real(a.zero_point[j] + a.factor[j] * acc, mode);
}

double accumulate(const DummyAffine& a, size_t j, std::span<const double> x) {
  double acc = a.bias_acc[j];
  for (const auto& [i, w] : a.rows[j]) acc += w * (x[i] - a.input_zero_point);
  return acc;
}

// Per-layer record for the backward pass.
struct Tape {
  std::vector<double> input;
  std::vector<char> pass;     // affine / relu: gradient passes through
  std::vector<int32_t> from;  // maxpool: selected input
};

std::vector<double> layer_forward(const DummyLayer& layer, std::span<const double> x, RoundingMode mode,
                                  Tape* tape) {
  std::vector<double> out;
  if (tape) tape->input.assign(x.begin(), x.end());
  if (const auto* a = std::get_if<DummyAffine>(&layer)) {
    out.resize(a->rows.size());
    if (tape) tape->pass.resize(out.size());
    for (size_t j = 0; j < out.size(); ++j) {
      const double y1 = round_value(*a, j, accumulate(*a, j, x), mode);
      out[j] = std::clamp(y1, a->clip_lo, a->clip_hi);
      if (tape) tape->pass[j] = y1 >= a->clip_lo && y1 <= a->clip_hi;
    }
  } else if (const auto* p = std::get_if<DummyPool>(&layer)) {
    out.resize(p->windows.size());
    if (tape) tape->from.resize(out.size());
    for (size_t j = 0; j < out.size(); ++j) {
      int32_t arg = p->windows[j].front();
      for (int32_t i : p->windows[j])
        if (x[i] > x[arg]) arg = i;
      out[j] = x[arg];
      if (tape) tape->from[j] = arg;
    }
  } else {
    const double z = std::get<DummyRelu>(layer).zero_point;
    out.resize(x.size());
    if (tape) tape->pass.resize(out.size());
    for (size_t j = 0; j < out.size(); ++j) {
      out[j] = std::max(x[j], z);
      if (tape) tape->pass[j] = x[j] >= z;
    }
  }
  return out;
}

}  // namespace

DummyNet build_dummy(const Network& net, int validate_samples, uint64_t seed) {
  DummyNet d;
  d.input_size = static_cast<size_t>(net.input_size);
  d.logit_scale = net.output_qp.scale;
  d.logit_zero_point = static_cast<double>(net.output_qp.zero_point);
  d.rounding = net.rounding;
  for (const Stage& stage : net.stages) {
    if (const auto* a = std::get_if<AffineStage>(&stage)) {
      DummyAffine da;
      da.input_zero_point = static_cast<double>(a->input_zero_point);
      da.clip_lo = static_cast<double>(a->clip_lb);
      da.clip_hi = static_cast<double>(a->clip_ub);
      for (const AffineNeuron& n : a->neurons) {
        std::vector<std::pair<int32_t, double>> row;
        for (const AccTerm& t : n.terms) row.emplace_back(t.input, static_cast<double>(t.weight));
        da.rows.push_back(std::move(row));
        da.bias_acc.push_back(static_cast<double>(n.bias_acc));
        da.factor.push_back(n.requant.factor());
        da.zero_point.push_back(static_cast<double>(n.requant.zero_point()));
        da.requant.push_back(n.requant);
      }
      d.layers.emplace_back(std::move(da));
    } else if (const auto* p = std::get_if<MaxPoolStage>(&stage)) {
      d.layers.emplace_back(DummyPool{p->windows});
    } else {
      d.layers.emplace_back(DummyRelu{static_cast<double>(std::get<ReluStage>(stage).zero_point)});
    }
  }
  if (validate_samples > 0) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int64_t> pixel(net.input_bounds.lb, net.input_bounds.ub);
    std::vector<int64_t> xi(d.input_size);
    std::vector<double> xd(d.input_size);
    for (int s = 0; s < validate_samples; ++s) {
      for (size_t i = 0; i < xi.size(); ++i) xd[i] = static_cast<double>(xi[i] = pixel(rng));
      const std::vector<int64_t> want = forward(net, xi);
      const std::vector<double> got = dummy_forward(d, xd);
      for (size_t k = 0; k < want.size(); ++k)
        if (got[k] != static_cast<double>(want[k]))
          throw std::logic_error("dummy network disagrees with integer inference");
    }
  }
  return d;
}

std::vector<double> dummy_forward(const DummyNet& net, std::span<const double> x) {
  std::vector<double> cur(x.begin(), x.end());
  for (const DummyLayer& layer : net.layers) cur = layer_forward(layer, cur, net.rounding, nullptr);
  return cur;
}

ForwardBackward forward_backward(const DummyNet& net, std::span<const double> x, int64_t label) {
  std::vector<Tape> tapes(net.layers.size());
  std::vector<double> cur(x.begin(), x.end());
  for (size_t k = 0; k < net.layers.size(); ++k) cur = layer_forward(net.layers[k], cur, net.rounding, &tapes[k]);

  ForwardBackward fb;
  fb.logits = cur;
  // Softmax cross-entropy on de-quantized logits.
  std::vector<double> z(cur.size());
  for (size_t k = 0; k < cur.size(); ++k) z[k] = net.logit_scale * (cur[k] - net.logit_zero_point);
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  fb.loss = std::log(sum) + zmax - z[label];
  std::vector<double> g(cur.size());
  for (size_t k = 0; k < cur.size(); ++k)
    g[k] = net.logit_scale * (std::exp(z[k] - zmax) / sum - (static_cast<int64_t>(k) == label ? 1.0 : 0.0));

  for (size_t k = net.layers.size(); k-- > 0;) {
    const Tape& tape = tapes[k];
    std::vector<double> gin(tape.input.size(), 0.0);
    if (const auto* a = std::get_if<DummyAffine>(&net.layers[k])) {
      for (size_t j = 0; j < a->rows.size(); ++j) {
        if (!tape.pass[j] || g[j] == 0.0) continue;
        const double gj = g[j] * a->factor[j];
        for (const auto& [i, w] : a->rows[j]) gin[i] += gj * w;
      }
    } else if (std::holds_alternative<DummyPool>(net.layers[k])) {
      for (size_t j = 0; j < g.size(); ++j) gin[tape.from[j]] += g[j];
    } else {
      for (size_t j = 0; j < g.size(); ++j)
        if (tape.pass[j]) gin[j] = g[j];
    }
    g = std::move(gin);
  }
  fb.grad = std::move(g);
  return fb;
}

std::optional<std::vector<int64_t>> pgd_attack(const Network& net, const DummyNet& dummy, const RobustnessQuery& query,
                                               const AttackConfig& config) {
  if (query.radius <= 0 || config.iterations < 1) return std::nullopt;
  const std::vector<Interval> box = query_input_box(net, query);
  const double alpha = config.alpha.value_or(static_cast<double>(query.radius) / 7.0);
  if (!(alpha > 0.0)) throw std::invalid_argument("attack step size must be positive");
  std::mt19937_64 rng(config.seed);
  const size_t n = box.size();
  std::vector<double> x(n);
  std::vector<int64_t> cand(n);
  for (int restart = 0; restart < std::max(1, config.restarts); ++restart) {
    for (size_t i = 0; i < n; ++i) {
      if (restart == 0) {
        x[i] = static_cast<double>(query.center.data[i]);
      } else {
        std::uniform_real_distribution<double> u(box[i].lo, box[i].hi);
        x[i] = u(rng);
      }
    }
    for (int step = 0; step < config.iterations; ++step) {
      if (config.deadline && std::chrono::steady_clock::now() > *config.deadline) return std::nullopt;
      const ForwardBackward fb = forward_backward(dummy, x, query.label);
      for (size_t i = 0; i < n; ++i) {
        const double s = fb.grad[i] > 0 ? 1.0 : (fb.grad[i] < 0 ? -1.0 : 0.0);
        x[i] = std::clamp(x[i] + alpha * s, box[i].lo, box[i].hi);
        cand[i] = static_cast<int64_t>(std::clamp(std::floor(x[i] + 0.5), box[i].lo, box[i].hi));
      }
      if (validate_counterexample(net, query, cand)) return cand;
    }
  }
  return std::nullopt;
}

}  // namespace qnnv
