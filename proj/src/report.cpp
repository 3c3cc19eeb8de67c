// SPDX-License-Identifier: Apache-2.0
#include "qnnv/report.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qnnv/model_io.hpp"

namespace qnnv {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
}

IntTensor int_array(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of integers");
  std::vector<int64_t> v;
  for (const json& e : j) {
    if (!e.is_number_integer()) throw ParseError(where + ": expected an array of integers");
    v.push_back(e.get<int64_t>());
  }
  return IntTensor(std::move(v));
}

ojson verdict_json(const Verdict& v) {
  ojson j;
  j["status"] = status_name(v.status);
  j["stage"] = stage_name(v.stage);
  j["time_s"] = v.time_s;
  if (v.witness) j["witness"] = *v.witness;
  j["timed_out"] = v.timed_out;
  j["stage_times"] = {{"attack_s", v.times.attack_s}, {"interval_s", v.times.interval_s}, {"ilp_s", v.times.ilp_s}};
  j["solver"] = {{"targets", v.ilp_targets},
                 {"nodes", v.solver.nodes},
                 {"lp_iterations", v.solver.lp_iterations},
                 {"wall_s", v.solver.wall_s}};
  if (!v.diagnostic.empty()) j["diagnostic"] = v.diagnostic;
  return j;
}

}  // namespace

std::vector<RobustnessQuery> parse_queries(std::string_view text, double timeout_s) {
  const json j = parse_json(text);
  if (!j.is_array()) throw ParseError("$: query file must be a JSON array");
  std::vector<RobustnessQuery> out;
  for (size_t i = 0; i < j.size(); ++i) {
    const std::string where = "$[" + std::to_string(i) + "]";
    const json& q = j[i];
    if (!q.is_object() || !q.contains("input") || !q.contains("label") || !q.contains("radius"))
      throw ParseError(where + ": expected {input, label, radius}");
    if (!q["label"].is_number_integer() || !q["radius"].is_number_integer())
      throw ParseError(where + ": label and radius must be integers");
    RobustnessQuery rq;
    rq.center = int_array(q["input"], where + ".input");
    rq.label = q["label"].get<int64_t>();
    rq.radius = q["radius"].get<int64_t>();
    rq.timeout_s = timeout_s;
    out.push_back(std::move(rq));
  }
  return out;
}

std::vector<RobustnessQuery> load_queries_file(const std::filesystem::path& path, double timeout_s) {
  return parse_queries(slurp(path), timeout_s);
}

IntTensor load_input_file(const std::filesystem::path& path) {
  const json j = parse_json(slurp(path));
  if (j.is_object() && j.contains("input")) return int_array(j["input"], "$.input");
  return int_array(j, "$");
}

std::string verdict_to_json(const Verdict& v, int indent) { return verdict_json(v).dump(indent); }

std::string report_to_json(const BatchReport& report, int indent) {
  ojson j;
  j["mode"] = mode_name(report.mode);
  j["queries"] = ojson::array();
  for (const Verdict& v : report.verdicts) j["queries"].push_back(verdict_json(v));
  j["aggregate"] = {{"count", report.verdicts.size()},
                    {"rob_pct", report.rob_pct},
                    {"uns_pct", report.uns_pct},
                    {"unk_pct", report.unk_pct},
                    {"mis_pct", report.mis_pct},
                    {"total_time_s", report.total_time_s},
                    {"by_stage", report.by_stage}};
  return j.dump(indent);
}

}  // namespace qnnv
