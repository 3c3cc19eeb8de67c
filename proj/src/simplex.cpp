// SPDX-License-Identifier: Apache-2.0
#include "qnnv/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qnnv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPriceTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr int kDegenerateStreak = 30;
constexpr int64_t kRefactorEvery = 1000;
constexpr int64_t kRecomputeEvery = 64;

}  // namespace

LPRelaxation LPRelaxation::from(const ILPModel& model) {
  LPRelaxation lp;
  lp.num_vars = model.num_vars();
  for (const Var& v : model.vars()) {
    lp.lo.push_back(v.lo);
    lp.hi.push_back(v.hi);
  }
  lp.rows = model.constraints();
  return lp;
}

SimplexEngine::SimplexEngine(const LPRelaxation& lp)
    : m_(lp.rows.size()), n_(lp.num_vars), cols_(lp.num_vars + lp.rows.size()) {
  a_.assign(m_ * n_, 0.0);
  lb_.assign(cols_, 0.0);
  ub_.assign(cols_, 0.0);
  val_.assign(cols_, 0.0);
  at_upper_.assign(cols_, 0);
  for (size_t j = 0; j < n_; ++j) {
    if (!std::isfinite(lp.lo[j]) || !std::isfinite(lp.hi[j]))
      throw std::invalid_argument("simplex: structural variables need finite bounds");
    lb_[j] = lp.lo[j];
    ub_[j] = lp.hi[j];
  }
  for (size_t i = 0; i < m_; ++i) {
    const LinConstraint& c = lp.rows[i];
    for (const LinTerm& term : c.terms) a_[i * n_ + term.var] += term.coeff;
    lb_[n_ + i] = c.cmp == Cmp::kLe ? -kInf : c.rhs;
    ub_[n_ + i] = c.cmp == Cmp::kGe ? kInf : c.rhs;
  }
  reset_basis();
}

void SimplexEngine::reset_basis() {
  tab_.assign(m_ * cols_, 0.0);
  basis_.resize(m_);
  row_of_.assign(cols_, -1);
  for (size_t i = 0; i < m_; ++i) {
    basis_[i] = static_cast<int>(n_ + i);
    row_of_[n_ + i] = static_cast<int>(i);
    for (size_t j = 0; j < n_; ++j) t(i, j) = a_[i * n_ + j];
  }
  for (size_t j = 0; j < n_; ++j) {
    at_upper_[j] = 0;
    val_[j] = lb_[j];
  }
  pivots_since_refactor_ = 0;
}

bool SimplexEngine::refactor() {
  // Solve M_B X = M for M = [A | -I]; the tableau is -X on nonbasic columns.
  const size_t w = m_ + cols_;
  std::vector<double> aug(m_ * w, 0.0);
  auto col_of_m = [&](size_t var, size_t row) -> double {
    if (var < n_) return a_[row * n_ + var];
    return var - n_ == row ? -1.0 : 0.0;
  };
  for (size_t i = 0; i < m_; ++i) {
    for (size_t k = 0; k < m_; ++k) aug[i * w + k] = col_of_m(static_cast<size_t>(basis_[k]), i);
    for (size_t j = 0; j < cols_; ++j) aug[i * w + m_ + j] = col_of_m(j, i);
  }
  for (size_t k = 0; k < m_; ++k) {
    size_t best = k;
    for (size_t i = k + 1; i < m_; ++i)
      if (std::abs(aug[i * w + k]) > std::abs(aug[best * w + k])) best = i;
    if (std::abs(aug[best * w + k]) < 1e-11) {
      reset_basis();
      return false;
    }
    if (best != k)
      for (size_t j = 0; j < w; ++j) std::swap(aug[k * w + j], aug[best * w + j]);
    const double inv = 1.0 / aug[k * w + k];
    for (size_t j = k; j < w; ++j) aug[k * w + j] *= inv;
    for (size_t i = 0; i < m_; ++i) {
      if (i == k) continue;
      const double f = aug[i * w + k];
      if (f == 0.0) continue;
      for (size_t j = k; j < w; ++j) aug[i * w + j] -= f * aug[k * w + j];
    }
  }
  for (size_t i = 0; i < m_; ++i)
    for (size_t j = 0; j < cols_; ++j) t(i, j) = row_of_[j] >= 0 ? 0.0 : -aug[i * w + m_ + j];
  pivots_since_refactor_ = 0;
  return true;
}

void SimplexEngine::recompute_basics() {
  for (size_t i = 0; i < m_; ++i) {
    const double* row = &tab_[i * cols_];
    double s = 0.0;
    for (size_t j = 0; j < cols_; ++j)
      if (row[j] != 0.0) s += row[j] * val_[j];
    val_[basis_[i]] = s;
  }
}

void SimplexEngine::set_bounds(const std::vector<double>& lo, const std::vector<double>& hi) {
  for (size_t j = 0; j < n_; ++j) {
    lb_[j] = lo[j];
    ub_[j] = hi[j];
    if (row_of_[j] < 0) val_[j] = at_upper_[j] ? ub_[j] : lb_[j];
  }
}

int SimplexEngine::infeasibility_sign(size_t var) const {
  const double v = val_[var];
  if (v < lb_[var] - kFeasTol) return -1;
  if (v > ub_[var] + kFeasTol) return 1;
  return 0;
}

void SimplexEngine::pivot(size_t r, size_t q) {
  const size_t p = static_cast<size_t>(basis_[r]);
  double* prow = &tab_[r * cols_];
  const double piv = prow[q];
  std::vector<size_t> nz;
  for (size_t j = 0; j < cols_; ++j) {
    if (j == q || prow[j] == 0.0) continue;
    prow[j] = -prow[j] / piv;
    nz.push_back(j);
  }
  prow[p] = 1.0 / piv;
  nz.push_back(p);
  prow[q] = 0.0;
  for (size_t i = 0; i < m_; ++i) {
    if (i == r) continue;
    double* row = &tab_[i * cols_];
    const double f = row[q];
    if (f == 0.0) continue;
    for (size_t j : nz) row[j] += f * prow[j];
    row[q] = 0.0;
  }
  basis_[r] = static_cast<int>(q);
  row_of_[q] = static_cast<int>(r);
  row_of_[p] = -1;
  ++pivots_since_refactor_;
}

LpStatus SimplexEngine::solve(std::optional<Clock::time_point> deadline) {
  recompute_basics();
  const int64_t limit = 50 * static_cast<int64_t>(cols_) + 20000;
  int64_t iters = 0;
  int degenerate = 0;
  bool refactored_for_proof = false;
  std::vector<double> d(cols_);
  std::vector<int> sigma(m_);
  while (true) {
    if (deadline && (iters & 15) == 0 && Clock::now() > *deadline) return LpStatus::kTimeout;
    if (iters > limit) throw NumericalError("simplex did not converge (cycling or numerical distress)");

    bool any = false;
    for (size_t i = 0; i < m_; ++i) {
      sigma[i] = infeasibility_sign(static_cast<size_t>(basis_[i]));
      any = any || sigma[i] != 0;
    }
    if (!any) return LpStatus::kFeasible;

    std::fill(d.begin(), d.end(), 0.0);
    for (size_t i = 0; i < m_; ++i) {
      if (sigma[i] == 0) continue;
      const double* row = &tab_[i * cols_];
      const double s = sigma[i];
      for (size_t j = 0; j < cols_; ++j)
        if (row[j] != 0.0) d[j] += s * row[j];
    }
    const bool bland = degenerate >= kDegenerateStreak;
    int q = -1;
    double best = 0.0;
    for (size_t j = 0; j < cols_; ++j) {
      if (row_of_[j] >= 0 || lb_[j] == ub_[j]) continue;
      const bool up = !at_upper_[j] && d[j] < -kPriceTol;
      const bool down = at_upper_[j] && d[j] > kPriceTol;
      if (!up && !down) continue;
      if (bland) {
        q = static_cast<int>(j);
        break;
      }
      if (std::abs(d[j]) > best) {
        best = std::abs(d[j]);
        q = static_cast<int>(j);
      }
    }
    if (q < 0) {
      if (!refactored_for_proof && pivots_since_refactor_ > 0) {
        refactored_for_proof = true;
        refactor();
        recompute_basics();
        continue;
      }
      return LpStatus::kInfeasible;
    }

    const double dir = d[q] < 0 ? 1.0 : -1.0;
    double tmin = ub_[q] - lb_[q];
    int leave = -1;
    bool leave_upper = false;
    double leave_rate = 0.0;
    for (size_t i = 0; i < m_; ++i) {
      const double rate = t(i, q) * dir;
      if (std::abs(rate) < kPivotTol) continue;
      const size_t b = static_cast<size_t>(basis_[i]);
      const double x = val_[b];
      double ti = kInf;
      bool to_upper = false;
      if (rate > 0) {
        if (x < lb_[b] - kFeasTol) {
          ti = (lb_[b] - x) / rate;
        } else if (x <= ub_[b] + kFeasTol && std::isfinite(ub_[b])) {
          ti = std::max(0.0, (ub_[b] - x) / rate);
          to_upper = true;
        }
      } else {
        if (x > ub_[b] + kFeasTol) {
          ti = (ub_[b] - x) / rate;
          to_upper = true;
        } else if (x >= lb_[b] - kFeasTol && std::isfinite(lb_[b])) {
          ti = std::max(0.0, (lb_[b] - x) / rate);
        }
      }
      if (!std::isfinite(ti)) continue;
      bool take = ti < tmin - 1e-12;
      if (!take && ti <= tmin + 1e-12 && leave >= 0) {
        take = bland ? basis_[i] < basis_[leave] : std::abs(rate) > std::abs(leave_rate);
      }
      if (take) {
        tmin = ti;
        leave = static_cast<int>(i);
        leave_upper = to_upper;
        leave_rate = rate;
      }
    }
    if (!std::isfinite(tmin)) throw NumericalError("simplex: unbounded phase-one step");

    const double step = dir * tmin;
    if (step != 0.0) {
      for (size_t i = 0; i < m_; ++i) {
        const double c = t(i, q);
        if (c != 0.0) val_[basis_[i]] += c * step;
      }
      val_[q] += step;
    }
    if (leave < 0) {
      at_upper_[q] = !at_upper_[q];
      val_[q] = at_upper_[q] ? ub_[q] : lb_[q];
    } else {
      const size_t p = static_cast<size_t>(basis_[leave]);
      at_upper_[p] = leave_upper;
      val_[p] = leave_upper ? ub_[p] : lb_[p];
      pivot(static_cast<size_t>(leave), static_cast<size_t>(q));
      if (pivots_since_refactor_ >= kRefactorEvery) refactor();
    }
    degenerate = tmin < 1e-12 ? degenerate + 1 : 0;
    ++iters;
    ++total_iterations_;
    if (iters % kRecomputeEvery == 0) recompute_basics();
  }
}

std::vector<double> SimplexEngine::solution() const { return {val_.begin(), val_.begin() + static_cast<long>(n_)}; }

LpResult solve_lp(const LPRelaxation& lp, std::optional<Clock::time_point> deadline) {
  SimplexEngine engine(lp);
  LpResult r;
  r.status = engine.solve(deadline);
  r.iterations = engine.iterations();
  if (r.status == LpStatus::kFeasible) r.x = engine.solution();
  return r;
}

}  // namespace qnnv
