// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "qnnv/model.hpp"

namespace qnnv {

/// Per-channel batch normalization constants (inference form).
struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = 1e-5;
};

/// Real-valued affine layer before quantization. Covers both linear layers
/// (fan_in = in_dim) and convolutions (fan_in = IC*KH*KW): each output channel
/// owns a contiguous block of `fan_in` weights.
struct RealAffineLayer {
  int64_t channels = 0;
  int64_t fan_in = 0;
  std::vector<double> weight;
  std::vector<double> bias;
};

/// Folds y = BN(Wx + b) into W'x + b' with W' = diag(g/sqrt(v+eps)) W and
/// b' = g (b - mu)/sqrt(v+eps) + beta. Throws std::invalid_argument on a
/// channel-count mismatch or invalid BN constants.
RealAffineLayer fuse_batchnorm(const RealAffineLayer& layer, const BatchNormParams& bn);

/// Marks an affine layer as ReLU-fused: steps (iii) and (iv) collapse to one
/// clip with lower bound max(lb, z_y). No-op when already fused.
void fuse_relu(AffineQuant& layer);

/// Returns a copy of the model where every affine layer directly followed by
/// a ReluLayer is fused with it and the ReluLayer removed.
QuantModel fuse_relu_layers(const QuantModel& model);

}  // namespace qnnv
