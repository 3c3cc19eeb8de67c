// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace qnnv {

/// Raised when a model violates one of its structural invariants. The message
/// names the offending layer and field.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RoundingMode { kHalfUp, kHalfEven };
enum class Activation { kNone, kReluFused };

/// Affine quantization constants: real = scale * (q - zero_point).
struct QuantParams {
  double scale = 1.0;
  int64_t zero_point = 0;

  bool operator==(const QuantParams&) const = default;
};

/// Representable integer range [lb, ub] of a quantized dtype.
struct DtypeBounds {
  int64_t lb = 0;
  int64_t ub = 255;

  bool contains(int64_t v) const { return v >= lb && v <= ub; }
  bool operator==(const DtypeBounds&) const = default;
};

inline constexpr DtypeBounds kUint8Bounds{0, 255};
inline constexpr DtypeBounds kInt8Bounds{-128, 127};

using Shape = std::vector<int64_t>;

int64_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Fields shared by the two affine layer kinds. Bias is stored in accumulator
/// units (scale input.scale * weight.scale, zero point 0).
struct AffineQuant {
  std::vector<QuantParams> weight_qp;  // one per output row / channel
  DtypeBounds weight_bounds = kInt8Bounds;
  std::vector<int64_t> bias_acc;       // one per output row / channel
  QuantParams input_qp;
  QuantParams output_qp;
  DtypeBounds out_bounds = kUint8Bounds;
  Activation activation = Activation::kNone;
  int64_t fused_clip_lb = 0;

  /// Lower clip bound actually applied by step (iii), i.e. lb or lb'.
  int64_t clip_lb() const { return fused_clip_lb; }
  /// Requantization factor f_j = (s_w^j * s_x) / s_y in that association order.
  double factor(size_t row) const {
    return (weight_qp[row].scale * input_qp.scale) / output_qp.scale;
  }

  bool operator==(const AffineQuant&) const = default;
};

struct QLinearLayer : AffineQuant {
  int64_t in_dim = 0;
  int64_t out_dim = 0;
  std::vector<int64_t> weight;  // row-major out_dim x in_dim

  int64_t w(int64_t row, int64_t col) const { return weight[row * in_dim + col]; }
  bool operator==(const QLinearLayer&) const = default;
};

struct QConvLayer : AffineQuant {
  Shape in_shape;      // C, H, W
  Shape out_shape;     // OC, OH, OW
  Shape kernel_shape;  // OC, IC, KH, KW
  int64_t stride_h = 1, stride_w = 1;
  int64_t pad_h = 0, pad_w = 0;
  std::vector<int64_t> weight;  // row-major kernel_shape

  bool operator==(const QConvLayer&) const = default;
};

struct MaxPoolLayer {
  Shape in_shape;   // C, H, W
  Shape out_shape;  // C, OH, OW
  int64_t kernel_h = 2, kernel_w = 2;
  int64_t stride_h = 2, stride_w = 2;

  bool operator==(const MaxPoolLayer&) const = default;
};

/// Stand-alone ReLU on a quantized tensor: y = max(x, z). Present only in
/// models that have not been through fuse_relu.
struct ReluLayer {
  Shape shape;
  int64_t zero_point = 0;

  bool operator==(const ReluLayer&) const = default;
};

using Layer = std::variant<QLinearLayer, QConvLayer, MaxPoolLayer, ReluLayer>;

std::string layer_kind(const Layer& layer);
Shape layer_output_shape(const Layer& layer);
int64_t layer_input_size(const Layer& layer);

struct QuantModel {
  Shape input_shape;
  QuantParams input_qp;
  DtypeBounds input_bounds = kUint8Bounds;
  std::vector<Layer> layers;
  int64_t num_classes = 0;
  RoundingMode rounding = RoundingMode::kHalfUp;

  int64_t input_size() const { return shape_size(input_shape); }
  bool operator==(const QuantModel&) const = default;
};

/// Checks every structural invariant of the model (positive scales, zero
/// points in range, shape chaining, quantization chaining, weight ranges,
/// fused clip bound). Throws ModelError naming the layer and field.
void validate_model(const QuantModel& model);

/// Convolution output extent for one spatial axis.
int64_t conv_out_extent(int64_t in, int64_t kernel, int64_t stride, int64_t pad);

}  // namespace qnnv
