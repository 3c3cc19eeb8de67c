// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "qnnv/inference.hpp"

namespace qnnv::testing {

std::set<Triple> gadget_points(bool is_max, Interval xr, Interval yr) {
  ILPModel m;
  const int x = m.add_var("x", VarKind::kInteger, xr.lo, xr.hi);
  const int y = m.add_var("y", VarKind::kInteger, yr.lo, yr.hi);
  const Operand z = is_max ? encode_max(m, "z", Operand::variable(x), Operand::variable(y))
                           : encode_min(m, "z", Operand::variable(x), Operand::variable(y));
  if (m.num_vars() != 5) throw std::logic_error("gadget should add z and two binaries");
  const auto zlo = static_cast<int64_t>(std::min(xr.lo, yr.lo)) - 2;
  const auto zhi = static_cast<int64_t>(std::max(xr.hi, yr.hi)) + 2;
  std::set<Triple> out;
  std::vector<int64_t> v(5);
  for (v[x] = static_cast<int64_t>(xr.lo); v[x] <= xr.hi; ++v[x])
    for (v[y] = static_cast<int64_t>(yr.lo); v[y] <= yr.hi; ++v[y])
      for (v[z.var] = zlo; v[z.var] <= zhi; ++v[z.var])
        for (int b = 0; b < 4; ++b) {
          v[z.var + 1] = b & 1;
          v[z.var + 2] = b >> 1;
          if (m.check_exact(v)) out.insert({v[x], v[y], v[z.var]});
        }
  return out;
}

std::set<Triple> expected_points(bool is_max, Interval xr, Interval yr) {
  std::set<Triple> out;
  for (auto x = static_cast<int64_t>(xr.lo); x <= xr.hi; ++x)
    for (auto y = static_cast<int64_t>(yr.lo); y <= yr.hi; ++y)
      out.insert({x, y, is_max ? std::max(x, y) : std::min(x, y)});
  return out;
}

std::set<int64_t> feasible_outputs(const ILPModel& m, int input, int64_t input_value, Operand out) {
  if (out.is_const()) return {out.value};
  const size_t n = m.num_vars();
  std::vector<std::vector<const LinConstraint*>> closes(n);
  for (const LinConstraint& c : m.constraints()) {
    int last = 0;
    for (const LinTerm& t : c.terms) last = std::max(last, t.var);
    closes[last].push_back(&c);
  }
  std::vector<double> v(n, 0.0);
  std::set<int64_t> vals;
  std::function<void(size_t)> rec = [&](size_t k) {
    if (k == n) {
      vals.insert(static_cast<int64_t>(v[out.var]));
      return;
    }
    const Var& var = m.var(static_cast<int>(k));
    const double lo = static_cast<int>(k) == input ? static_cast<double>(input_value) : var.lo;
    const double hi = static_cast<int>(k) == input ? static_cast<double>(input_value) : var.hi;
    for (double x = lo; x <= hi; x += 1.0) {
      v[k] = x;
      bool ok = true;
      for (const LinConstraint* c : closes[k]) {
        const double l = c->lhs(v);
        ok = ok && (c->cmp == Cmp::kLe ? l <= c->rhs : c->cmp == Cmp::kGe ? l >= c->rhs : l == c->rhs);
      }
      if (ok) rec(k + 1);
    }
  };
  rec(0);
  return vals;
}

int count_bound_violations(const Network& net, const BoundsTable& t, int samples, std::mt19937_64& rng) {
  int bad = 0;
  std::vector<int64_t> x(t.input.size());
  for (int s = 0; s < samples; ++s) {
    for (size_t i = 0; i < x.size(); ++i) {
      std::uniform_int_distribution<int64_t> d(static_cast<int64_t>(t.input[i].lo), static_cast<int64_t>(t.input[i].hi));
      x[i] = d(rng);
    }
    const auto traces = forward_trace(net, x);
    for (size_t k = 0; k < traces.size(); ++k) {
      const StageBounds& sb = t.stages[k];
      for (size_t j = 0; j < traces[k].out.size(); ++j) bad += !sb.out[j].contains(static_cast<double>(traces[k].out[j]));
      for (size_t j = 0; j < traces[k].yhat1.size(); ++j) {
        bad += !sb.yhat1[j].contains(static_cast<double>(traces[k].yhat1[j]));
        bad += !sb.ymax[j].contains(static_cast<double>(traces[k].ymax[j]));
      }
    }
  }
  return bad;
}

namespace {

std::vector<double> pool_forward(const DummyPool& p, const std::vector<double>& cur) {
  std::vector<double> next;
  for (const auto& w : p.windows) {
    double best = cur[w.front()];
    for (int32_t i : w) best = std::max(best, cur[i]);
    next.push_back(best);
  }
  return next;
}

double affine_pre_round(const DummyAffine& a, size_t j, const std::vector<double>& cur) {
  double acc = a.bias_acc[j];
  for (const auto& [i, w] : a.rows[j]) acc += w * (cur[i] - a.input_zero_point);
  return a.zero_point[j] + a.factor[j] * acc;
}

}  // namespace

double RoundPinnedLoss::operator()(std::span<const double> x) const {
  std::vector<double> cur(x.begin(), x.end());
  size_t ai = 0;
  for (const DummyLayer& layer : net->layers) {
    std::vector<double> next;
    if (const auto* a = std::get_if<DummyAffine>(&layer)) {
      for (size_t j = 0; j < a->rows.size(); ++j)
        next.push_back(std::clamp(affine_pre_round(*a, j, cur) + offset[ai][j], a->clip_lo, a->clip_hi));
      ++ai;
    } else if (const auto* p = std::get_if<DummyPool>(&layer)) {
      next = pool_forward(*p, cur);
    } else {
      const double z = std::get<DummyRelu>(layer).zero_point;
      for (double v : cur) next.push_back(std::max(v, z));
    }
    cur = std::move(next);
  }
  std::vector<double> zl(cur.size());
  for (size_t k = 0; k < cur.size(); ++k) zl[k] = net->logit_scale * (cur[k] - net->logit_zero_point);
  const double mx = *std::max_element(zl.begin(), zl.end());
  double s = 0.0;
  for (double v : zl) s += std::exp(v - mx);
  return std::log(s) + mx - zl[label];
}

RoundPinnedLoss pin_rounding(const DummyNet& net, std::span<const double> x, int64_t label, double* kink_dist) {
  RoundPinnedLoss s{&net, label, {}};
  std::vector<double> cur(x.begin(), x.end());
  *kink_dist = INFINITY;
  for (const DummyLayer& layer : net.layers) {
    std::vector<double> next;
    if (const auto* a = std::get_if<DummyAffine>(&layer)) {
      std::vector<double> off;
      for (size_t j = 0; j < a->rows.size(); ++j) {
        const double y0 = affine_pre_round(*a, j, cur);
        const double y1 = round_real(y0, net.rounding);
        off.push_back(y1 - y0);
        *kink_dist = std::min({*kink_dist, std::abs(y1 - a->clip_lo), std::abs(y1 - a->clip_hi)});
        next.push_back(std::clamp(y1, a->clip_lo, a->clip_hi));
      }
      s.offset.push_back(std::move(off));
    } else if (const auto* p = std::get_if<DummyPool>(&layer)) {
      next = pool_forward(*p, cur);
    } else {
      const double z = std::get<DummyRelu>(layer).zero_point;
      for (double v : cur) {
        *kink_dist = std::min(*kink_dist, std::abs(v - z));
        next.push_back(std::max(v, z));
      }
    }
    cur = std::move(next);
  }
  return s;
}

}  // namespace qnnv::testing
