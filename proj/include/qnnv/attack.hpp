// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "qnnv/network.hpp"
#include "qnnv/query.hpp"

namespace qnnv {

/// Affine stage in floating point: acc = sum_i w_i (x_i - z_x) + b_acc,
/// yhat1 = Round(z_y + f * acc), then clip to [clip_lo, clip_hi].
struct DummyAffine {
  std::vector<std::vector<std::pair<int32_t, double>>> rows;
  std::vector<double> bias_acc;
  std::vector<double> factor;
  std::vector<double> zero_point;
  std::vector<Requantizer> requant;
  double input_zero_point = 0.0;
  double clip_lo = 0.0;
  double clip_hi = 255.0;
};

struct DummyPool {
  std::vector<std::vector<int32_t>> windows;
};

struct DummyRelu {
  double zero_point = 0.0;
};

using DummyLayer = std::variant<DummyAffine, DummyPool, DummyRelu>;

/// Floating-point copy of a quantized network used only for gradients.
struct DummyNet {
  size_t input_size = 0;
  std::vector<DummyLayer> layers;
  double logit_scale = 1.0;
  double logit_zero_point = 0.0;
  RoundingMode rounding = RoundingMode::kHalfUp;
};

/// With `validate_samples` > 0, checks exact-mode logits against integer
/// inference on that many random inputs and throws std::logic_error on a
/// mismatch.
DummyNet build_dummy(const Network& net, int validate_samples = 0, uint64_t seed = 1);

/// Exact-mode forward: true Round/Clip/max at every step. On integer inputs
/// the logits equal integer inference.
std::vector<double> dummy_forward(const DummyNet& net, std::span<const double> x);

struct ForwardBackward {
  std::vector<double> logits;
  std::vector<double> grad;  // d loss / d x
  double loss = 0.0;
};

/// Cross-entropy of softmax(s_y (o - z_y)) against `label`, with rounded
/// values propagated forward and Round treated as the identity backward.
/// Clip and max pass gradient 1 inside (kinks included) and 0 outside.
ForwardBackward forward_backward(const DummyNet& net, std::span<const double> x, int64_t label);

struct AttackConfig {
  std::optional<double> alpha;  // default radius / 7
  int iterations = 7;
  int restarts = 1;
  uint64_t seed = 0;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Signed-gradient ascent on the loss, projected onto the query box. After
/// every step the point is rounded half-up and checked with
/// validate_counterexample; the first valid point is returned. Restarts
/// after the first begin at a random point of the box.
std::optional<std::vector<int64_t>> pgd_attack(const Network& net, const DummyNet& dummy, const RobustnessQuery& query,
                                               const AttackConfig& config = {});

}  // namespace qnnv
