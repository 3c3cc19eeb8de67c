// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "qnnv/model.hpp"

namespace qnnv {

/// Malformed model file. The message carries the JSON path of the field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a model file (format_version 1). Layers are taken as written: a
/// "relu" layer stays a separate layer even when it could be fused.
QuantModel load_model(std::string_view bytes);
QuantModel load_model_file(const std::filesystem::path& path);

/// Inverse of load_model. Scales are written in shortest round-trip decimal
/// form so a reload reproduces the exact double.
std::string serialize_model(const QuantModel& model);

std::string format_scale(double scale);
double parse_scale(const std::string& text);

}  // namespace qnnv
