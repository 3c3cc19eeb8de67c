// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qnnv/ilp_model.hpp"
#include "qnnv/simplex.hpp"

namespace qnnv {

enum class SolveStatus { kFeasible, kInfeasible, kTimeout };
std::string status_name(SolveStatus s);

struct SolveStats {
  int64_t nodes = 0;
  int64_t lp_iterations = 0;
  double wall_s = 0.0;
};
std::string stats_to_json(const SolveStats& s);

struct SolveResult {
  SolveStatus status = SolveStatus::kInfeasible;
  std::vector<int64_t> witness;  // one value per variable when kFeasible
  SolveStats stats;
};

struct SolveOptions {
  std::optional<Clock::time_point> deadline;
  int restart_every = 256;
};

/// Tightens integer bounds from the rows (activity-based propagation).
/// Returns false when some row cannot be satisfied within the bounds.
bool propagate_bounds(const ILPModel& model, std::vector<double>& lo, std::vector<double>& hi, int max_passes = 20);

/// Branch-and-bound feasibility search over the LP relaxation. Candidate
/// leaves are rounded and re-checked in exact rational arithmetic; a leaf
/// that fails the exact check is split three ways on a variable of a
/// violated row. INFEASIBLE means the tree was exhausted.
SolveResult solve_ilp(const ILPModel& model, const SolveOptions& opts = {});

}  // namespace qnnv
