// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "qnnv/model.hpp"
#include "qnnv/requant.hpp"

namespace qnnv {

/// One non-zero term of an accumulator: centered weight (w - z_w) times the
/// centered input (x - z_x).
struct AccTerm {
  int32_t input;
  int64_t weight;
};

/// Output neuron of an affine layer:
///   acc = sum_i weight_i * (x_i - z_x) + bias_acc
///   yhat1 = Round(z_y + f * acc)
struct AffineNeuron {
  std::vector<AccTerm> terms;
  int64_t bias_acc = 0;
  Requantizer requant;
};

/// Linear or convolutional layer flattened to per-neuron accumulators.
/// Padding positions hold the input zero point, so they contribute nothing
/// and are simply absent from `terms`.
struct AffineStage {
  std::vector<AffineNeuron> neurons;
  int64_t input_zero_point = 0;
  int64_t clip_lb = 0;  // lb, or lb' = max(lb, z_y) when ReLU-fused
  int64_t clip_ub = 255;
  int64_t output_zero_point = 0;
  bool relu_fused = false;
};

struct MaxPoolStage {
  std::vector<std::vector<int32_t>> windows;  // input indices per output
};

struct ReluStage {
  int64_t size = 0;
  int64_t zero_point = 0;
};

using Stage = std::variant<AffineStage, MaxPoolStage, ReluStage>;

/// A QuantModel lowered to a chain of flat stages. Built once and shared
/// read-only by inference, interval analysis, the ILP encoder and the attack.
struct Network {
  int64_t input_size = 0;
  QuantParams input_qp;
  DtypeBounds input_bounds;
  RoundingMode rounding = RoundingMode::kHalfUp;
  int64_t num_classes = 0;
  QuantParams output_qp;  // quantization of the logits
  std::vector<Stage> stages;
  std::vector<int64_t> stage_sizes;  // output size per stage
};

/// Encoder / bounds-table variable names: "x<i>" for inputs and
/// "L<stage>.n<neuron>.<what>" for stage values.
std::string input_var_name(size_t index);
std::string neuron_var_name(size_t stage, size_t neuron, const std::string& what);

Stage lower_layer(const Layer& layer);
Network lower(const QuantModel& model);

int64_t stage_size(const Stage& stage);

}  // namespace qnnv
