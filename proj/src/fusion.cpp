// SPDX-License-Identifier: Apache-2.0
#include "qnnv/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace qnnv {

RealAffineLayer fuse_batchnorm(const RealAffineLayer& layer, const BatchNormParams& bn) {
  const auto n = static_cast<size_t>(layer.channels);
  if (bn.gamma.size() != n || bn.beta.size() != n || bn.running_mean.size() != n ||
      bn.running_var.size() != n)
    throw std::invalid_argument("fuse_batchnorm: batch norm has " + std::to_string(bn.gamma.size()) +
                                " channels, layer has " + std::to_string(layer.channels));
  if (layer.bias.size() != n || layer.weight.size() != n * static_cast<size_t>(layer.fan_in))
    throw std::invalid_argument("fuse_batchnorm: layer weight/bias sizes inconsistent");
  if (bn.epsilon < 0.0) throw std::invalid_argument("fuse_batchnorm: negative epsilon");

  RealAffineLayer out = layer;
  for (size_t c = 0; c < n; ++c) {
    if (bn.running_var[c] < 0.0) throw std::invalid_argument("fuse_batchnorm: negative variance");
    const double denom = std::sqrt(bn.running_var[c] + bn.epsilon);
    if (!(denom > 0.0)) throw std::invalid_argument("fuse_batchnorm: zero variance with zero epsilon");
    const double k = bn.gamma[c] / denom;
    for (int64_t i = 0; i < layer.fan_in; ++i) out.weight[c * layer.fan_in + i] *= k;
    out.bias[c] = bn.gamma[c] * (layer.bias[c] - bn.running_mean[c]) / denom + bn.beta[c];
  }
  return out;
}

void fuse_relu(AffineQuant& layer) {
  if (layer.activation == Activation::kReluFused) return;
  layer.activation = Activation::kReluFused;
  layer.fused_clip_lb = std::max(layer.out_bounds.lb, layer.output_qp.zero_point);
}

QuantModel fuse_relu_layers(const QuantModel& model) {
  QuantModel out = model;
  out.layers.clear();
  for (size_t i = 0; i < model.layers.size(); ++i) {
    Layer layer = model.layers[i];
    const bool next_is_relu =
        i + 1 < model.layers.size() && std::holds_alternative<ReluLayer>(model.layers[i + 1]);
    if (next_is_relu) {
      if (auto* l = std::get_if<QLinearLayer>(&layer)) {
        fuse_relu(*l);
        ++i;
      } else if (auto* c = std::get_if<QConvLayer>(&layer)) {
        fuse_relu(*c);
        ++i;
      }
    }
    out.layers.push_back(std::move(layer));
  }
  return out;
}

}  // namespace qnnv
