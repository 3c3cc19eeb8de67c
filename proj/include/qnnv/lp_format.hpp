// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "qnnv/ilp_model.hpp"

namespace qnnv {

class LpParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CPLEX LP text with a zero objective. Coefficients use %.17g so parsing
/// the file back yields bit-identical doubles; the objective lists every
/// variable in id order so ids survive the round trip.
std::string write_lp(const ILPModel& model, const std::string& comment = "");
void write_lp_file(const ILPModel& model, const std::filesystem::path& path, const std::string& comment = "");

/// Reads the subset of the LP format that write_lp produces plus the usual
/// variations (multi-line rows, unnamed rows, one-sided and free bounds,
/// keyword abbreviations). Every variable must end up integer or binary
/// with finite bounds.
ILPModel parse_lp(std::string_view text);
ILPModel parse_lp_file(const std::filesystem::path& path);

}  // namespace qnnv
