// SPDX-License-Identifier: Apache-2.0
#include "qnnv/model.hpp"

#include <cmath>
#include <sstream>

namespace qnnv {

int64_t shape_size(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

int64_t conv_out_extent(int64_t in, int64_t kernel, int64_t stride, int64_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

std::string layer_kind(const Layer& layer) {
  struct {
    std::string operator()(const QLinearLayer&) const { return "qlinear"; }
    std::string operator()(const QConvLayer&) const { return "qconv"; }
    std::string operator()(const MaxPoolLayer&) const { return "maxpool"; }
    std::string operator()(const ReluLayer&) const { return "relu"; }
  } v;
  return std::visit(v, layer);
}

Shape layer_output_shape(const Layer& layer) {
  struct {
    Shape operator()(const QLinearLayer& l) const { return {l.out_dim}; }
    Shape operator()(const QConvLayer& l) const { return l.out_shape; }
    Shape operator()(const MaxPoolLayer& l) const { return l.out_shape; }
    Shape operator()(const ReluLayer& l) const { return l.shape; }
  } v;
  return std::visit(v, layer);
}

int64_t layer_input_size(const Layer& layer) {
  struct {
    int64_t operator()(const QLinearLayer& l) const { return l.in_dim; }
    int64_t operator()(const QConvLayer& l) const { return shape_size(l.in_shape); }
    int64_t operator()(const MaxPoolLayer& l) const { return shape_size(l.in_shape); }
    int64_t operator()(const ReluLayer& l) const { return shape_size(l.shape); }
  } v;
  return std::visit(v, layer);
}

namespace {

[[noreturn]] void fail(size_t index, const std::string& kind, const std::string& field,
                       const std::string& what) {
  std::ostringstream msg;
  msg << "layer " << index << " (" << kind << "): field '" << field << "': " << what;
  throw ModelError(msg.str());
}

void check_qp(const QuantParams& qp, const DtypeBounds& bounds, size_t index,
              const std::string& kind, const std::string& field) {
  if (!(qp.scale > 0.0) || !std::isfinite(qp.scale))
    fail(index, kind, field + ".scale", "scale must be finite and > 0");
  if (!bounds.contains(qp.zero_point))
    fail(index, kind, field + ".zero_point", "zero point outside dtype bounds");
}

void check_bounds(const DtypeBounds& b, size_t index, const std::string& kind,
                  const std::string& field) {
  if (!(b.lb < b.ub)) fail(index, kind, field, "requires lb < ub");
}

void check_affine(const AffineQuant& a, int64_t rows, int64_t fan_in, const QuantParams& in_qp,
                  const std::vector<int64_t>& weight, size_t index, const std::string& kind) {
  check_bounds(a.out_bounds, index, kind, "output_quant");
  check_bounds(a.weight_bounds, index, kind, "weight_bounds");
  if (static_cast<int64_t>(a.weight_qp.size()) != rows)
    fail(index, kind, "weight_quant", "expected one entry per output row");
  if (static_cast<int64_t>(a.bias_acc.size()) != rows)
    fail(index, kind, "bias_acc", "expected one entry per output row");
  if (static_cast<int64_t>(weight.size()) != rows * fan_in)
    fail(index, kind, "weight", "size does not match shape");
  for (size_t r = 0; r < a.weight_qp.size(); ++r)
    check_qp(a.weight_qp[r], a.weight_bounds, index, kind, "weight_quant[" + std::to_string(r) + "]");
  check_qp(a.output_qp, a.out_bounds, index, kind, "output_quant");
  if (!(a.input_qp == in_qp))
    fail(index, kind, "input_quant", "does not match the previous layer's output quantization");
  for (int64_t w : weight)
    if (!a.weight_bounds.contains(w)) fail(index, kind, "weight", "entry outside weight bounds");
  const int64_t expected_lb = a.activation == Activation::kReluFused
                                  ? std::max(a.out_bounds.lb, a.output_qp.zero_point)
                                  : a.out_bounds.lb;
  if (a.fused_clip_lb != expected_lb)
    fail(index, kind, "fused_clip_lb", "inconsistent with activation and zero point");
}

}  // namespace

void validate_model(const QuantModel& model) {
  if (model.input_shape.empty() || model.input_size() <= 0)
    throw ModelError("model: field 'input_shape': must be non-empty and positive");
  check_bounds(model.input_bounds, 0, "input", "input_quant");
  if (!(model.input_qp.scale > 0.0) || !std::isfinite(model.input_qp.scale))
    throw ModelError("model: field 'input_quant.scale': scale must be finite and > 0");
  if (!model.input_bounds.contains(model.input_qp.zero_point))
    throw ModelError("model: field 'input_quant.zero_point': zero point outside dtype bounds");
  if (model.layers.empty()) throw ModelError("model: field 'layers': at least one layer required");

  Shape shape = model.input_shape;
  QuantParams qp = model.input_qp;
  DtypeBounds bounds = model.input_bounds;
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    const std::string kind = layer_kind(layer);
    if (layer_input_size(layer) != shape_size(shape))
      fail(i, kind, "input", "expects " + std::to_string(layer_input_size(layer)) +
                                 " inputs but previous layer produces " + shape_string(shape));
    if (const auto* l = std::get_if<QLinearLayer>(&layer)) {
      if (l->out_dim <= 0 || l->in_dim <= 0) fail(i, kind, "weight", "empty weight matrix");
      check_affine(*l, l->out_dim, l->in_dim, qp, l->weight, i, kind);
      qp = l->output_qp;
      bounds = l->out_bounds;
    } else if (const auto* c = std::get_if<QConvLayer>(&layer)) {
      if (c->in_shape.size() != 3 || c->out_shape.size() != 3 || c->kernel_shape.size() != 4)
        fail(i, kind, "shape", "expected CHW in/out shapes and OIHW kernel shape");
      if (c->in_shape != shape && shape_size(c->in_shape) != shape_size(shape))
        fail(i, kind, "in_shape", "does not match previous output");
      if (c->kernel_shape[1] != c->in_shape[0] || c->kernel_shape[0] != c->out_shape[0])
        fail(i, kind, "kernel_shape", "channel counts do not match in/out shapes");
      if (c->stride_h <= 0 || c->stride_w <= 0 || c->pad_h < 0 || c->pad_w < 0)
        fail(i, kind, "stride", "stride must be positive and padding non-negative");
      if (conv_out_extent(c->in_shape[1], c->kernel_shape[2], c->stride_h, c->pad_h) != c->out_shape[1] ||
          conv_out_extent(c->in_shape[2], c->kernel_shape[3], c->stride_w, c->pad_w) != c->out_shape[2])
        fail(i, kind, "out_shape", "inconsistent with input shape, kernel, stride and padding");
      const int64_t fan_in = c->kernel_shape[1] * c->kernel_shape[2] * c->kernel_shape[3];
      check_affine(*c, c->out_shape[0], fan_in, qp, c->weight, i, kind);
      qp = c->output_qp;
      bounds = c->out_bounds;
    } else if (const auto* p = std::get_if<MaxPoolLayer>(&layer)) {
      if (p->in_shape.size() != 3 || p->out_shape.size() != 3)
        fail(i, kind, "shape", "expected CHW shapes");
      if (p->kernel_h <= 0 || p->kernel_w <= 0 || p->stride_h <= 0 || p->stride_w <= 0)
        fail(i, kind, "kernel", "kernel and stride must be positive");
      if (p->out_shape[0] != p->in_shape[0] ||
          conv_out_extent(p->in_shape[1], p->kernel_h, p->stride_h, 0) != p->out_shape[1] ||
          conv_out_extent(p->in_shape[2], p->kernel_w, p->stride_w, 0) != p->out_shape[2])
        fail(i, kind, "out_shape", "pooling windows do not tile the input");
    } else if (const auto* r = std::get_if<ReluLayer>(&layer)) {
      if (r->zero_point != qp.zero_point)
        fail(i, kind, "zero_point", "must equal the zero point of its input tensor");
      if (!bounds.contains(r->zero_point)) fail(i, kind, "zero_point", "outside dtype bounds");
    }
    shape = layer_output_shape(layer);
  }
  if (shape_size(shape) != model.num_classes)
    throw ModelError("model: field 'num_classes': last layer produces " + shape_string(shape) +
                     " outputs, expected " + std::to_string(model.num_classes));
  if (model.num_classes < 1) throw ModelError("model: field 'num_classes': must be >= 1");
}

}  // namespace qnnv
