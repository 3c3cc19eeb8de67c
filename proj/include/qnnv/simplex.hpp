// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qnnv/ilp_model.hpp"

namespace qnnv {

using Clock = std::chrono::steady_clock;

/// LP cycling or a singular basis that refactorization could not repair.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Continuous relaxation of an ILPModel: same rows and bounds, integrality
/// dropped.
struct LPRelaxation {
  size_t num_vars = 0;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<LinConstraint> rows;

  static LPRelaxation from(const ILPModel& model);
};

enum class LpStatus { kFeasible, kInfeasible, kTimeout };

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> x;  // a basic feasible point when kFeasible
  int64_t iterations = 0;
};

/// Bounded-variable primal simplex on the phase-one objective (sum of bound
/// violations of the basic variables). Rows are turned into equalities
/// a_i . x - r_i = 0 with a logical r_i bounded by the row's range, so the
/// starting basis is all logicals and stays valid when bounds change; the
/// branch-and-bound reuses one engine across nodes.
class SimplexEngine {
 public:
  explicit SimplexEngine(const LPRelaxation& lp);

  /// New structural bounds; the current basis is kept.
  void set_bounds(const std::vector<double>& lo, const std::vector<double>& hi);

  LpStatus solve(std::optional<Clock::time_point> deadline = std::nullopt);

  /// Structural part of the current point.
  std::vector<double> solution() const;
  int64_t iterations() const { return total_iterations_; }

  static constexpr double kFeasTol = 1e-6;

 private:
  double& t(size_t row, size_t col) { return tab_[row * cols_ + col]; }
  double t(size_t row, size_t col) const { return tab_[row * cols_ + col]; }

  void reset_basis();
  bool refactor();
  void recompute_basics();
  void pivot(size_t row, size_t q);
  int infeasibility_sign(size_t var) const;

  size_t m_ = 0, n_ = 0, cols_ = 0;
  std::vector<double> a_;    // m x n row-major constraint matrix
  std::vector<double> tab_;  // m x (n+m): basic = sum over nonbasic of tab * value
  std::vector<double> lb_, ub_, val_;
  std::vector<char> at_upper_;  // nonbasic side
  std::vector<int> basis_;   // row -> variable
  std::vector<int> row_of_;  // variable -> row, -1 when nonbasic
  int64_t total_iterations_ = 0;
  int64_t pivots_since_refactor_ = 0;
};

/// One-shot LP feasibility.
LpResult solve_lp(const LPRelaxation& lp, std::optional<Clock::time_point> deadline = std::nullopt);

}  // namespace qnnv
