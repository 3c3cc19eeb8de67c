// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qnnv/attack.hpp"
#include "qnnv/ilp_solver.hpp"
#include "qnnv/network.hpp"
#include "qnnv/query.hpp"

namespace qnnv {

enum class Mode { kIlp, kIlpIn, kEqv };
std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);  // "ilp", "ilp+in", "eqv"

enum class Status { kRobust, kUnsafe, kUnknown, kMisclassified };
std::string status_name(Status s);

enum class StageKind { kPrecheck, kAttack, kInterval, kIlp };
std::string stage_name(StageKind s);

struct StageTimes {
  double attack_s = 0.0;
  double interval_s = 0.0;
  double ilp_s = 0.0;
};

struct Verdict {
  Status status = Status::kUnknown;
  StageKind stage = StageKind::kPrecheck;
  std::optional<std::vector<int64_t>> witness;
  StageTimes times;
  double time_s = 0.0;
  bool timed_out = false;
  SolveStats solver;            // summed over the target ILPs
  int64_t ilp_targets = 0;      // number of target ILPs emitted
  std::string diagnostic;
};

struct VerifyOptions {
  Mode mode = Mode::kEqv;
  AttackConfig attack;
  double attack_share = 0.05;
  double interval_share = 0.15;
  std::optional<std::filesystem::path> emit_lp_dir;
  std::optional<std::filesystem::path> bounds_dump;
};

/// Precheck, then (by mode) attack, interval analysis and one ILP per
/// remaining target, all under the query's timeout. UNSAFE verdicts always
/// carry a validated witness. `dummy` is built on demand when null.
Verdict verify(const Network& net, const RobustnessQuery& query, const VerifyOptions& opts,
               const DummyNet* dummy = nullptr);

struct BatchReport {
  Mode mode = Mode::kEqv;
  std::vector<Verdict> verdicts;
  double rob_pct = 0.0;
  double uns_pct = 0.0;
  double unk_pct = 0.0;
  double mis_pct = 0.0;
  double total_time_s = 0.0;  // timeouts counted at the full limit
  std::map<std::string, int64_t> by_stage;  // decided queries per stage

  void recompute(const std::vector<RobustnessQuery>& queries);
};

/// Runs the queries on up to `jobs` threads. Verdicts keep query order.
BatchReport verify_batch(const Network& net, const std::vector<RobustnessQuery>& queries, const VerifyOptions& opts,
                         int jobs = 1);

}  // namespace qnnv
