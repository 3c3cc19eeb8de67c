// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "qnnv/model.hpp"

namespace qnnv {

/// Row-major integer tensor.
struct IntTensor {
  Shape shape;
  std::vector<int64_t> data;

  IntTensor() = default;
  explicit IntTensor(std::vector<int64_t> values)
      : shape{static_cast<int64_t>(values.size())}, data(std::move(values)) {}
  IntTensor(Shape s, std::vector<int64_t> values) : shape(std::move(s)), data(std::move(values)) {}

  size_t size() const { return data.size(); }
  bool operator==(const IntTensor&) const = default;
};

/// Local robustness instance: every integer input within l-inf distance
/// `radius` of `center` (and inside the input dtype bounds) must classify as
/// `label`.
struct RobustnessQuery {
  IntTensor center;
  int64_t label = 0;
  int64_t radius = 0;
  double timeout_s = 60.0;
};

/// Throws std::invalid_argument when the query does not fit the model.
void check_query(const QuantModel& model, const RobustnessQuery& query);

}  // namespace qnnv
