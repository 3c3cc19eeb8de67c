// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qnnv/pipeline.hpp"
#include "qnnv/query.hpp"

namespace qnnv {

/// Query file: JSON array of {"input": [ints], "label": int, "radius": int}.
/// Every query gets `timeout_s`.
std::vector<RobustnessQuery> parse_queries(std::string_view text, double timeout_s);
std::vector<RobustnessQuery> load_queries_file(const std::filesystem::path& path, double timeout_s);

/// Input file for a single query: a JSON array of integers, or an object
/// with an "input" array.
IntTensor load_input_file(const std::filesystem::path& path);

std::string verdict_to_json(const Verdict& v, int indent = -1);

/// {"mode", "queries": [{status, stage, time_s, witness?, ...}],
///  "aggregate": {rob_pct, uns_pct, unk_pct, mis_pct, total_time_s, by_stage}}
std::string report_to_json(const BatchReport& report, int indent = 1);

}  // namespace qnnv
