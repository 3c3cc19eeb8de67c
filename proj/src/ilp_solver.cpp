// SPDX-License-Identifier: Apache-2.0
#include "qnnv/ilp_solver.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace qnnv {

namespace {

constexpr double kIntTol = 1e-6;

struct Node {
  std::vector<double> lo;
  std::vector<double> hi;
  double score = 0.0;  // fractionality of the parent's LP point
};

}  // namespace

std::string status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::kFeasible: return "FEASIBLE";
    case SolveStatus::kInfeasible: return "INFEASIBLE";
    default: return "TIMEOUT";
  }
}

std::string stats_to_json(const SolveStats& s) {
  return nlohmann::json{{"nodes", s.nodes}, {"lp_iterations", s.lp_iterations}, {"wall_s", s.wall_s}}.dump();
}

bool propagate_bounds(const ILPModel& model, std::vector<double>& lo, std::vector<double>& hi, int max_passes) {
  for (size_t j = 0; j < lo.size(); ++j)
    if (lo[j] > hi[j]) return false;
  for (int pass = 0; pass < max_passes; ++pass) {
    bool changed = false;
    for (const LinConstraint& c : model.constraints()) {
      double minact = 0.0, maxact = 0.0;
      for (const LinTerm& t : c.terms) {
        if (t.coeff > 0) {
          minact += t.coeff * lo[t.var];
          maxact += t.coeff * hi[t.var];
        } else {
          minact += t.coeff * hi[t.var];
          maxact += t.coeff * lo[t.var];
        }
      }
      const double tol = kIntTol * (1.0 + std::abs(c.rhs));
      const bool upper = c.cmp != Cmp::kGe;  // row <= rhs
      const bool lower = c.cmp != Cmp::kLe;  // row >= rhs
      if (upper && minact > c.rhs + tol) return false;
      if (lower && maxact < c.rhs - tol) return false;
      for (const LinTerm& t : c.terms) {
        const double a = t.coeff;
        if (a == 0.0) continue;
        const double own_min = a > 0 ? a * lo[t.var] : a * hi[t.var];
        const double own_max = a > 0 ? a * hi[t.var] : a * lo[t.var];
        if (upper) {
          const double v = (c.rhs - (minact - own_min)) / a;
          if (a > 0) {
            const double nb = std::floor(v + kIntTol);
            if (nb < hi[t.var]) { hi[t.var] = nb; changed = true; }
          } else {
            const double nb = std::ceil(v - kIntTol);
            if (nb > lo[t.var]) { lo[t.var] = nb; changed = true; }
          }
        }
        if (lower) {
          const double v = (c.rhs - (maxact - own_max)) / a;
          if (a > 0) {
            const double nb = std::ceil(v - kIntTol);
            if (nb > lo[t.var]) { lo[t.var] = nb; changed = true; }
          } else {
            const double nb = std::floor(v + kIntTol);
            if (nb < hi[t.var]) { hi[t.var] = nb; changed = true; }
          }
        }
        if (lo[t.var] > hi[t.var]) return false;
      }
    }
    if (!changed) break;
  }
  return true;
}

SolveResult solve_ilp(const ILPModel& model, const SolveOptions& opts) {
  const auto start = Clock::now();
  SolveResult res;
  const size_t n = model.num_vars();
  auto finish = [&](SolveStatus s) {
    res.status = s;
    res.stats.wall_s = std::chrono::duration<double>(Clock::now() - start).count();
    return res;
  };

  Node root;
  for (const Var& v : model.vars()) {
    root.lo.push_back(v.lo);
    root.hi.push_back(v.hi);
  }
  if (n == 0) return finish(model.num_constraints() == 0 || model.check_exact({}) ? SolveStatus::kFeasible
                                                                                   : SolveStatus::kInfeasible);

  SimplexEngine engine(LPRelaxation::from(model));
  std::vector<Node> open;
  open.push_back(std::move(root));
  std::vector<int64_t> point(n);

  while (!open.empty()) {
    if (opts.deadline && Clock::now() > *opts.deadline) return finish(SolveStatus::kTimeout);
    if (opts.restart_every > 0 && res.stats.nodes > 0 && res.stats.nodes % opts.restart_every == 0) {
      const auto best = std::min_element(open.begin(), open.end(),
                                         [](const Node& a, const Node& b) { return a.score < b.score; });
      std::iter_swap(best, open.end() - 1);
    }
    Node node = std::move(open.back());
    open.pop_back();
    ++res.stats.nodes;
    if (!propagate_bounds(model, node.lo, node.hi)) continue;

    bool all_fixed = true;
    for (size_t j = 0; j < n && all_fixed; ++j) all_fixed = node.lo[j] == node.hi[j];
    std::vector<double> x;
    if (all_fixed) {
      x = node.lo;
    } else {
      engine.set_bounds(node.lo, node.hi);
      const LpStatus st = engine.solve(opts.deadline);
      res.stats.lp_iterations = engine.iterations();
      if (st == LpStatus::kTimeout) return finish(SolveStatus::kTimeout);
      if (st == LpStatus::kInfeasible) continue;
      x = engine.solution();
    }

    // Most fractional binary first, then most fractional general integer.
    int branch = -1;
    double best_frac = kIntTol;
    bool best_binary = false;
    double score = 0.0;
    for (size_t j = 0; j < n; ++j) {
      const double f = std::abs(x[j] - std::round(x[j]));
      score += f;
      if (f <= kIntTol) continue;
      const bool binary = model.var(static_cast<int>(j)).kind == VarKind::kBinary;
      if ((binary && !best_binary) || (binary == best_binary && f > best_frac)) {
        branch = static_cast<int>(j);
        best_frac = f;
        best_binary = binary;
      }
    }

    if (branch < 0) {
      for (size_t j = 0; j < n; ++j)
        point[j] = static_cast<int64_t>(std::clamp(std::round(x[j]), node.lo[j], node.hi[j]));
      const auto bad = model.violated_constraint(point);
      if (!bad) {
        res.witness = point;
        return finish(SolveStatus::kFeasible);
      }
      // The LP point is integral only up to tolerance: split on a free
      // variable of the violated row around its rounded value.
      int pick = -1;
      double weight = -1.0;
      for (const LinTerm& t : model.constraints()[*bad].terms) {
        if (node.lo[t.var] == node.hi[t.var]) continue;
        if (std::abs(t.coeff) > weight) {
          weight = std::abs(t.coeff);
          pick = t.var;
        }
      }
      if (pick < 0) continue;
      const double v = static_cast<double>(point[pick]);
      Node below = node, fixed = node, above = std::move(node);
      below.hi[pick] = v - 1;
      fixed.lo[pick] = fixed.hi[pick] = v;
      above.lo[pick] = v + 1;
      for (Node* child : {&below, &above, &fixed}) {
        if (child->lo[pick] > child->hi[pick]) continue;
        child->score = score;
        open.push_back(std::move(*child));
      }
      continue;
    }

    const double v = x[branch];
    Node down = node, up = std::move(node);
    down.hi[branch] = std::floor(v);
    up.lo[branch] = std::ceil(v);
    down.score = up.score = score;
    // Dive towards the nearer side first (it is pushed last).
    if (v - std::floor(v) < 0.5) {
      open.push_back(std::move(up));
      open.push_back(std::move(down));
    } else {
      open.push_back(std::move(down));
      open.push_back(std::move(up));
    }
  }
  return finish(SolveStatus::kInfeasible);
}

}  // namespace qnnv
