// SPDX-License-Identifier: Apache-2.0
#include "qnnv/network.hpp"

namespace qnnv {

namespace {

AffineStage affine_base(const AffineQuant& a) {
  AffineStage s;
  s.input_zero_point = a.input_qp.zero_point;
  s.clip_lb = a.clip_lb();
  s.clip_ub = a.out_bounds.ub;
  s.output_zero_point = a.output_qp.zero_point;
  s.relu_fused = a.activation == Activation::kReluFused;
  return s;
}

AffineStage lower_linear(const QLinearLayer& l) {
  AffineStage s = affine_base(l);
  s.neurons.resize(l.out_dim);
  for (int64_t j = 0; j < l.out_dim; ++j) {
    AffineNeuron& n = s.neurons[j];
    const int64_t zw = l.weight_qp[j].zero_point;
    for (int64_t i = 0; i < l.in_dim; ++i) {
      const int64_t cw = l.w(j, i) - zw;
      if (cw != 0) n.terms.push_back({static_cast<int32_t>(i), cw});
    }
    n.bias_acc = l.bias_acc[j];
    n.requant = Requantizer(l.factor(j), l.output_qp.zero_point);
  }
  return s;
}

AffineStage lower_conv(const QConvLayer& c) {
  AffineStage s = affine_base(c);
  const int64_t oc_n = c.out_shape[0], oh_n = c.out_shape[1], ow_n = c.out_shape[2];
  const int64_t ic_n = c.in_shape[0], ih_n = c.in_shape[1], iw_n = c.in_shape[2];
  const int64_t kh_n = c.kernel_shape[2], kw_n = c.kernel_shape[3];
  s.neurons.resize(oc_n * oh_n * ow_n);
  for (int64_t oc = 0; oc < oc_n; ++oc) {
    const int64_t zw = c.weight_qp[oc].zero_point;
    const Requantizer rq(c.factor(oc), c.output_qp.zero_point);
    for (int64_t oy = 0; oy < oh_n; ++oy) {
      for (int64_t ox = 0; ox < ow_n; ++ox) {
        AffineNeuron& n = s.neurons[(oc * oh_n + oy) * ow_n + ox];
        for (int64_t ic = 0; ic < ic_n; ++ic) {
          for (int64_t ky = 0; ky < kh_n; ++ky) {
            const int64_t iy = oy * c.stride_h - c.pad_h + ky;
            if (iy < 0 || iy >= ih_n) continue;
            for (int64_t kx = 0; kx < kw_n; ++kx) {
              const int64_t ix = ox * c.stride_w - c.pad_w + kx;
              if (ix < 0 || ix >= iw_n) continue;
              const int64_t cw = c.weight[((oc * ic_n + ic) * kh_n + ky) * kw_n + kx] - zw;
              if (cw != 0) n.terms.push_back({static_cast<int32_t>((ic * ih_n + iy) * iw_n + ix), cw});
            }
          }
        }
        n.bias_acc = c.bias_acc[oc];
        n.requant = rq;
      }
    }
  }
  return s;
}

MaxPoolStage lower_pool(const MaxPoolLayer& p) {
  MaxPoolStage s;
  const int64_t ch = p.out_shape[0], oh_n = p.out_shape[1], ow_n = p.out_shape[2];
  const int64_t ih_n = p.in_shape[1], iw_n = p.in_shape[2];
  for (int64_t c = 0; c < ch; ++c)
    for (int64_t oy = 0; oy < oh_n; ++oy)
      for (int64_t ox = 0; ox < ow_n; ++ox) {
        std::vector<int32_t> window;
        for (int64_t ky = 0; ky < p.kernel_h; ++ky)
          for (int64_t kx = 0; kx < p.kernel_w; ++kx) {
            const int64_t iy = oy * p.stride_h + ky, ix = ox * p.stride_w + kx;
            if (iy < ih_n && ix < iw_n) window.push_back(static_cast<int32_t>((c * ih_n + iy) * iw_n + ix));
          }
        s.windows.push_back(std::move(window));
      }
  return s;
}

}  // namespace

std::string input_var_name(size_t index) { return "x" + std::to_string(index); }

std::string neuron_var_name(size_t stage, size_t neuron, const std::string& what) {
  return "L" + std::to_string(stage) + ".n" + std::to_string(neuron) + "." + what;
}

Stage lower_layer(const Layer& layer) {
  if (const auto* l = std::get_if<QLinearLayer>(&layer)) return lower_linear(*l);
  if (const auto* c = std::get_if<QConvLayer>(&layer)) return lower_conv(*c);
  if (const auto* p = std::get_if<MaxPoolLayer>(&layer)) return lower_pool(*p);
  const auto& r = std::get<ReluLayer>(layer);
  return ReluStage{shape_size(r.shape), r.zero_point};
}

int64_t stage_size(const Stage& stage) {
  if (const auto* a = std::get_if<AffineStage>(&stage)) return static_cast<int64_t>(a->neurons.size());
  if (const auto* p = std::get_if<MaxPoolStage>(&stage)) return static_cast<int64_t>(p->windows.size());
  return std::get<ReluStage>(stage).size;
}

Network lower(const QuantModel& model) {
  Network net;
  net.input_size = model.input_size();
  net.input_qp = model.input_qp;
  net.input_bounds = model.input_bounds;
  net.rounding = model.rounding;
  net.num_classes = model.num_classes;
  net.output_qp = model.input_qp;
  for (const Layer& layer : model.layers) {
    net.stages.push_back(lower_layer(layer));
    net.stage_sizes.push_back(stage_size(net.stages.back()));
    if (const auto* l = std::get_if<QLinearLayer>(&layer)) net.output_qp = l->output_qp;
    if (const auto* c = std::get_if<QConvLayer>(&layer)) net.output_qp = c->output_qp;
  }
  return net;
}

}  // namespace qnnv
