// SPDX-License-Identifier: Apache-2.0
// qnnv: robustness verification for integer-quantized networks.
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "qnnv/ilp_solver.hpp"
#include "qnnv/inference.hpp"
#include "qnnv/lp_format.hpp"
#include "qnnv/model_io.hpp"
#include "qnnv/network.hpp"
#include "qnnv/pipeline.hpp"
#include "qnnv/report.hpp"

namespace {

constexpr int kExitDecisive = 0;
constexpr int kExitError = 1;
constexpr int kExitUnknown = 2;

int exit_code(qnnv::Status s) { return s == qnnv::Status::kUnknown ? kExitUnknown : kExitDecisive; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verify local robustness of integer-quantized neural networks"};
  app.require_subcommand(1);

  std::string model_path, input_path, queries_path, report_path, mode = "eqv", lp_path;
  std::string emit_lp, bounds_dump;
  int64_t label = 0, radius = 0;
  double timeout = 60.0;
  int jobs = 1, restarts = 1;
  uint64_t seed = 0;

  auto* verify = app.add_subcommand("verify", "Verify one query");
  verify->add_option("--model", model_path, "Model file (JSON)")->required();
  verify->add_option("--input", input_path, "Quantized center input (JSON int array)")->required();
  verify->add_option("--label", label, "Expected label")->required();
  verify->add_option("--radius", radius, "Integer l-inf radius")->required();
  verify->add_option("--mode", mode, "ilp | ilp+in | eqv")->capture_default_str();
  verify->add_option("--timeout", timeout, "Seconds")->capture_default_str();
  verify->add_option("--emit-lp", emit_lp, "Write the target ILPs as LP files into this directory");
  verify->add_option("--bounds-dump", bounds_dump, "Write the bounds table as JSON");
  verify->add_option("--seed", seed, "Attack seed")->capture_default_str();
  verify->add_option("--restarts", restarts, "Attack restarts")->capture_default_str();

  auto* batch = app.add_subcommand("batch", "Verify a query file and write a report");
  batch->add_option("--model", model_path, "Model file (JSON)")->required();
  batch->add_option("--queries", queries_path, "Query file (JSON)")->required();
  batch->add_option("--mode", mode, "ilp | ilp+in | eqv")->capture_default_str();
  batch->add_option("--timeout", timeout, "Seconds per query")->capture_default_str();
  batch->add_option("--jobs", jobs, "Concurrent queries")->capture_default_str();
  batch->add_option("--report", report_path, "Report file (JSON); stdout when omitted");
  batch->add_option("--seed", seed, "Attack seed")->capture_default_str();
  batch->add_option("--restarts", restarts, "Attack restarts")->capture_default_str();

  auto* solve = app.add_subcommand("solve-lp", "Solve an LP-format feasibility ILP");
  solve->add_option("file", lp_path, "LP file")->required();
  solve->add_option("--timeout", timeout, "Seconds")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      const qnnv::ILPModel m = qnnv::parse_lp_file(lp_path);
      qnnv::SolveOptions so;
      so.deadline = qnnv::Clock::now() + std::chrono::duration_cast<qnnv::Clock::duration>(
                                             std::chrono::duration<double>(timeout));
      const qnnv::SolveResult r = qnnv::solve_ilp(m, so);
      std::cout << qnnv::status_name(r.status) << '\n' << qnnv::stats_to_json(r.stats) << '\n';
      if (r.status == qnnv::SolveStatus::kFeasible)
        for (size_t i = 0; i < r.witness.size(); ++i) std::cout << m.var(static_cast<int>(i)).name << ' ' << r.witness[i] << '\n';
      return r.status == qnnv::SolveStatus::kTimeout ? kExitUnknown : kExitDecisive;
    }

    const qnnv::QuantModel model = qnnv::load_model_file(model_path);
    const qnnv::Network net = qnnv::lower(model);
    qnnv::VerifyOptions opts;
    opts.mode = qnnv::parse_mode(mode);
    opts.attack.seed = seed;
    opts.attack.restarts = restarts;

    if (*verify) {
      qnnv::RobustnessQuery q;
      q.center = qnnv::load_input_file(input_path);
      q.label = label;
      q.radius = radius;
      q.timeout_s = timeout;
      qnnv::check_query(model, q);
      if (!emit_lp.empty()) opts.emit_lp_dir = emit_lp;
      if (!bounds_dump.empty()) opts.bounds_dump = bounds_dump;
      const qnnv::Verdict v = qnnv::verify(net, q, opts);
      std::cout << qnnv::verdict_to_json(v, 1) << '\n';
      return exit_code(v.status);
    }

    const std::vector<qnnv::RobustnessQuery> queries = qnnv::load_queries_file(queries_path, timeout);
    for (const auto& q : queries) qnnv::check_query(model, q);
    const qnnv::BatchReport report = qnnv::verify_batch(net, queries, opts, jobs);
    const std::string text = qnnv::report_to_json(report);
    if (report_path.empty()) {
      std::cout << text << '\n';
    } else {
      std::ofstream f(report_path);
      if (!f) throw std::runtime_error("cannot write " + report_path);
      f << text << '\n';
      std::fprintf(stderr, "rob %.1f%%  uns %.1f%%  unk %.1f%%  mis %.1f%%  total %.2fs\n", report.rob_pct,
                   report.uns_pct, report.unk_pct, report.mis_pct, report.total_time_s);
    }
    return report.unk_pct > 0 ? kExitUnknown : kExitDecisive;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
}
