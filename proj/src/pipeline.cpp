// SPDX-License-Identifier: Apache-2.0
#include "qnnv/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "qnnv/encoder.hpp"
#include "qnnv/inference.hpp"
#include "qnnv/interval.hpp"
#include "qnnv/lp_format.hpp"

namespace qnnv {

namespace {

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

Clock::time_point after(Clock::time_point t, double s) {
  return t + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(s));
}

// Targets with the largest possible o_t - o_label first.
std::vector<int64_t> order_targets(std::vector<int64_t> targets, const std::vector<double>& gap) {
  std::stable_sort(targets.begin(), targets.end(), [&](int64_t a, int64_t b) { return gap[a] > gap[b]; });
  return targets;
}

std::vector<double> box_gaps(const Network& net, const BoundsTable& table, int64_t label) {
  const std::vector<Interval>& logits = table.stages.empty() ? table.input : table.stages.back().out;
  std::vector<double> gap(static_cast<size_t>(net.num_classes), 0.0);
  for (size_t t = 0; t < gap.size(); ++t) gap[t] = logits[t].hi - logits[label].lo;
  return gap;
}

void dump_bounds(const Network& net, const BoundsTable& table, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << bounds_to_json(net, table) << '\n';
}

}  // namespace

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kIlp: return "ilp";
    case Mode::kIlpIn: return "ilp+in";
    default: return "eqv";
  }
}

Mode parse_mode(const std::string& s) {
  if (s == "ilp") return Mode::kIlp;
  if (s == "ilp+in") return Mode::kIlpIn;
  if (s == "eqv") return Mode::kEqv;
  throw std::invalid_argument("unknown mode '" + s + "' (expected ilp, ilp+in or eqv)");
}

std::string status_name(Status s) {
  switch (s) {
    case Status::kRobust: return "ROBUST";
    case Status::kUnsafe: return "UNSAFE";
    case Status::kMisclassified: return "MISCLASSIFIED";
    default: return "UNKNOWN";
  }
}

std::string stage_name(StageKind s) {
  switch (s) {
    case StageKind::kAttack: return "attack";
    case StageKind::kInterval: return "interval";
    case StageKind::kIlp: return "ilp";
    default: return "precheck";
  }
}

Verdict verify(const Network& net, const RobustnessQuery& query, const VerifyOptions& opts, const DummyNet* dummy) {
  const auto start = Clock::now();
  const auto deadline = after(start, query.timeout_s);
  Verdict v;
  auto done = [&](Status s, StageKind stage) {
    v.status = s;
    v.stage = stage;
    v.time_s = seconds_since(start);
    return v;
  };

  if (predict(net, query.center.data) != query.label) return done(Status::kMisclassified, StageKind::kPrecheck);

  StageKind stage = StageKind::kAttack;
  try {
    if (opts.mode == Mode::kEqv) {
      const auto t0 = Clock::now();
      DummyNet local;
      if (!dummy) {
        local = build_dummy(net);
        dummy = &local;
      }
      AttackConfig cfg = opts.attack;
      cfg.deadline = after(start, opts.attack_share * query.timeout_s);
      auto witness = pgd_attack(net, *dummy, query, cfg);
      v.times.attack_s = seconds_since(t0);
      if (witness) {
        v.witness = std::move(witness);
        return done(Status::kUnsafe, StageKind::kAttack);
      }
    }

    BoundsTable bounds;
    std::vector<int64_t> targets;
    std::vector<double> gap;
    if (opts.mode == Mode::kIlp) {
      stage = StageKind::kIlp;
      bounds = structural_bounds(net, query);
      gap = box_gaps(net, bounds, query.label);
      for (int64_t t = 0; t < net.num_classes; ++t)
        if (t != query.label) targets.push_back(t);
    } else {
      stage = StageKind::kInterval;
      const auto t0 = Clock::now();
      AnalysisResult ar = analyze(net, query);
      v.times.interval_s = seconds_since(t0);
      if (opts.bounds_dump) dump_bounds(net, ar.bounds, *opts.bounds_dump);
      if (ar.verdict == IntervalVerdict::kRobust) return done(Status::kRobust, StageKind::kInterval);
      bounds = std::move(ar.bounds);
      targets = std::move(ar.open_targets);
      gap = std::move(ar.max_logit_gap);
    }
    if (opts.mode == Mode::kIlp && opts.bounds_dump) dump_bounds(net, bounds, *opts.bounds_dump);

    stage = StageKind::kIlp;
    const auto t0 = Clock::now();
    EncodeOptions eo;
    eo.use_phases = opts.mode != Mode::kIlp;
    std::vector<TargetILP> ilps = encode_query(net, query, bounds, eo, order_targets(targets, gap));
    v.ilp_targets = static_cast<int64_t>(ilps.size());
    if (opts.emit_lp_dir) {
      std::filesystem::create_directories(*opts.emit_lp_dir);
      for (const TargetILP& ilp : ilps)
        write_lp_file(ilp.model, *opts.emit_lp_dir / ("target" + std::to_string(ilp.target) + ".lp"),
                      "misclassification as label " + std::to_string(ilp.target) + " (query label " +
                          std::to_string(query.label) + ", radius " + std::to_string(query.radius) + ")");
    }
    bool all_infeasible = true;
    for (const TargetILP& ilp : ilps) {
      SolveOptions so;
      so.deadline = deadline;
      const SolveResult r = solve_ilp(ilp.model, so);
      v.solver.nodes += r.stats.nodes;
      v.solver.lp_iterations += r.stats.lp_iterations;
      v.solver.wall_s += r.stats.wall_s;
      if (r.status == SolveStatus::kInfeasible) continue;
      all_infeasible = false;
      if (r.status == SolveStatus::kTimeout) {
        v.timed_out = true;
        break;
      }
      std::vector<int64_t> x(ilp.inputs.size());
      for (size_t i = 0; i < x.size(); ++i) x[i] = r.witness[ilp.inputs[i]];
      if (validate_counterexample(net, query, x)) {
        v.witness = std::move(x);
        v.times.ilp_s = seconds_since(t0);
        return done(Status::kUnsafe, StageKind::kIlp);
      }
      v.diagnostic = "ILP witness for target " + std::to_string(ilp.target) + " failed validation";
    }
    v.times.ilp_s = seconds_since(t0);
    if (all_infeasible) return done(Status::kRobust, StageKind::kIlp);
    if (v.timed_out && v.diagnostic.empty()) v.diagnostic = "timeout";
    return done(Status::kUnknown, StageKind::kIlp);
  } catch (const std::exception& e) {
    v.diagnostic = e.what();
    return done(Status::kUnknown, stage);
  }
}

void BatchReport::recompute(const std::vector<RobustnessQuery>& queries) {
  rob_pct = uns_pct = unk_pct = mis_pct = total_time_s = 0.0;
  by_stage = {{"attack", 0}, {"interval", 0}, {"ilp", 0}, {"precheck", 0}};
  if (verdicts.empty()) return;
  for (size_t i = 0; i < verdicts.size(); ++i) {
    const Verdict& v = verdicts[i];
    switch (v.status) {
      case Status::kRobust: rob_pct += 1; break;
      case Status::kUnsafe: uns_pct += 1; break;
      case Status::kMisclassified: mis_pct += 1; break;
      default: unk_pct += 1; break;
    }
    if (v.status != Status::kUnknown) ++by_stage[stage_name(v.stage)];
    total_time_s += v.timed_out ? queries[i].timeout_s : v.time_s;
  }
  const double n = static_cast<double>(verdicts.size());
  rob_pct *= 100.0 / n;
  uns_pct *= 100.0 / n;
  unk_pct *= 100.0 / n;
  mis_pct *= 100.0 / n;
}

BatchReport verify_batch(const Network& net, const std::vector<RobustnessQuery>& queries, const VerifyOptions& opts,
                         int jobs) {
  BatchReport report;
  report.mode = opts.mode;
  report.verdicts.resize(queries.size());
  const DummyNet dummy = build_dummy(net);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < queries.size(); i = next++) report.verdicts[i] = verify(net, queries[i], opts, &dummy);
  };
  const int n = std::clamp(jobs, 1, static_cast<int>(std::max<size_t>(queries.size(), 1)));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  report.recompute(queries);
  return report;
}

}  // namespace qnnv
