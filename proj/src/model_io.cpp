// SPDX-License-Identifier: Apache-2.0
#include "qnnv/model_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace qnnv {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ParseError("model file: " + path + ": " + what);
}

const json& need(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) bad(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) bad(path + "." + key, "missing field");
  return *it;
}

int64_t as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) bad(path, "expected an integer");
  return v.get<int64_t>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) bad(path, "expected a string");
  return v.get<std::string>();
}

double scale_field(const json& v, const std::string& path) {
  if (!v.is_string()) bad(path, "scales are stored as decimal strings");
  try {
    return parse_scale(v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    bad(path, e.what());
  }
}

Shape int_array(const json& v, const std::string& path) {
  if (!v.is_array()) bad(path, "expected an array");
  Shape out;
  for (size_t i = 0; i < v.size(); ++i) out.push_back(as_int(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// Accepts either a scalar or a [h, w] pair.
std::pair<int64_t, int64_t> pair_field(const json& v, const std::string& path) {
  if (v.is_number_integer()) return {v.get<int64_t>(), v.get<int64_t>()};
  Shape s = int_array(v, path);
  if (s.size() != 2) bad(path, "expected an integer or a pair");
  return {s[0], s[1]};
}

void flatten_ints(const json& v, const std::string& path, std::vector<int64_t>& out, Shape& dims,
                  size_t depth) {
  if (v.is_array()) {
    if (dims.size() <= depth) dims.push_back(static_cast<int64_t>(v.size()));
    else if (dims[depth] != static_cast<int64_t>(v.size())) bad(path, "ragged nested array");
    for (size_t i = 0; i < v.size(); ++i)
      flatten_ints(v[i], path + "[" + std::to_string(i) + "]", out, dims, depth + 1);
    return;
  }
  if (depth != dims.size()) bad(path, "ragged nested array");
  out.push_back(as_int(v, path));
}

DtypeBounds bounds_field(const json& q, const std::string& path) {
  return {as_int(need(q, "lb", path), path + ".lb"), as_int(need(q, "ub", path), path + ".ub")};
}

void read_affine(const json& j, const std::string& path, AffineQuant& a, const QuantParams& in_qp,
                 int64_t rows) {
  const json& wq = need(j, "weight_quant", path);
  if (!wq.is_array()) bad(path + ".weight_quant", "expected an array");
  for (size_t r = 0; r < wq.size(); ++r) {
    const std::string p = path + ".weight_quant[" + std::to_string(r) + "]";
    a.weight_qp.push_back({scale_field(need(wq[r], "scale", p), p + ".scale"),
                           as_int(need(wq[r], "zero_point", p), p + ".zero_point")});
  }
  if (auto it = j.find("weight_bounds"); it != j.end())
    a.weight_bounds = bounds_field(*it, path + ".weight_bounds");
  a.bias_acc = int_array(need(j, "bias_acc", path), path + ".bias_acc");
  const json& oq = need(j, "output_quant", path);
  a.output_qp = {scale_field(need(oq, "scale", path + ".output_quant"), path + ".output_quant.scale"),
                 as_int(need(oq, "zero_point", path + ".output_quant"), path + ".output_quant.zero_point")};
  a.out_bounds = bounds_field(oq, path + ".output_quant");
  a.input_qp = in_qp;
  const std::string act = as_string(need(j, "activation", path), path + ".activation");
  if (act == "none") a.activation = Activation::kNone;
  else if (act == "relu") a.activation = Activation::kReluFused;
  else bad(path + ".activation", "expected \"none\" or \"relu\"");
  a.fused_clip_lb = a.activation == Activation::kReluFused
                        ? std::max(a.out_bounds.lb, a.output_qp.zero_point)
                        : a.out_bounds.lb;
  (void)rows;
}

json qp_json(const QuantParams& qp) {
  return {{"scale", format_scale(qp.scale)}, {"zero_point", qp.zero_point}};
}

json affine_json(const AffineQuant& a) {
  json j;
  json wq = json::array();
  for (const auto& qp : a.weight_qp) wq.push_back(qp_json(qp));
  j["weight_quant"] = wq;
  if (!(a.weight_bounds == kInt8Bounds))
    j["weight_bounds"] = {{"lb", a.weight_bounds.lb}, {"ub", a.weight_bounds.ub}};
  j["bias_acc"] = a.bias_acc;
  json oq = qp_json(a.output_qp);
  oq["lb"] = a.out_bounds.lb;
  oq["ub"] = a.out_bounds.ub;
  j["output_quant"] = oq;
  j["activation"] = a.activation == Activation::kReluFused ? "relu" : "none";
  return j;
}

}  // namespace

std::string format_scale(double scale) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), scale);
  if (ec != std::errc()) throw std::runtime_error("cannot format scale");
  return std::string(buf, end);
}

double parse_scale(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw std::invalid_argument("'" + text + "' is not a decimal number");
  return v;
}

QuantModel load_model(std::string_view bytes) {
  json root;
  try {
    root = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    size_t line = 1;
    for (size_t i = 0; i < std::min(e.byte, bytes.size()); ++i)
      if (bytes[i] == '\n') ++line;
    throw ParseError("model file: line " + std::to_string(line) + ": " + e.what());
  }
  const std::string top = "$";
  if (as_int(need(root, "format_version", top), "$.format_version") != 1)
    bad("$.format_version", "unsupported version (expected 1)");

  QuantModel m;
  m.input_shape = int_array(need(root, "input_shape", top), "$.input_shape");
  const json& iq = need(root, "input_quant", top);
  m.input_qp = {scale_field(need(iq, "scale", "$.input_quant"), "$.input_quant.scale"),
                as_int(need(iq, "zero_point", "$.input_quant"), "$.input_quant.zero_point")};
  m.input_bounds = bounds_field(iq, "$.input_quant");
  if (auto it = root.find("rounding_mode"); it != root.end()) {
    const std::string mode = as_string(*it, "$.rounding_mode");
    if (mode == "half_up") m.rounding = RoundingMode::kHalfUp;
    else if (mode == "half_even") m.rounding = RoundingMode::kHalfEven;
    else bad("$.rounding_mode", "expected \"half_up\" or \"half_even\"");
  }

  const json& layers = need(root, "layers", top);
  if (!layers.is_array()) bad("$.layers", "expected an array");
  QuantParams qp = m.input_qp;
  Shape shape = m.input_shape;
  for (size_t i = 0; i < layers.size(); ++i) {
    const json& j = layers[i];
    const std::string path = "$.layers[" + std::to_string(i) + "]";
    const std::string type = as_string(need(j, "type", path), path + ".type");
    if (type == "qlinear") {
      QLinearLayer l;
      Shape dims;
      flatten_ints(need(j, "weight", path), path + ".weight", l.weight, dims, 0);
      if (dims.size() != 2) bad(path + ".weight", "expected a 2-D array");
      l.out_dim = dims[0];
      l.in_dim = dims[1];
      read_affine(j, path, l, qp, l.out_dim);
      qp = l.output_qp;
      m.layers.emplace_back(std::move(l));
    } else if (type == "qconv") {
      QConvLayer c;
      Shape dims;
      flatten_ints(need(j, "weight", path), path + ".weight", c.weight, dims, 0);
      c.kernel_shape = int_array(need(j, "kernel_shape", path), path + ".kernel_shape");
      if (dims != c.kernel_shape) bad(path + ".weight", "dimensions do not match kernel_shape");
      c.in_shape = int_array(need(j, "in_shape", path), path + ".in_shape");
      c.out_shape = int_array(need(j, "out_shape", path), path + ".out_shape");
      std::tie(c.stride_h, c.stride_w) = pair_field(need(j, "stride", path), path + ".stride");
      std::tie(c.pad_h, c.pad_w) = pair_field(need(j, "padding", path), path + ".padding");
      read_affine(j, path, c, qp, c.kernel_shape.empty() ? 0 : c.kernel_shape[0]);
      qp = c.output_qp;
      m.layers.emplace_back(std::move(c));
    } else if (type == "maxpool") {
      MaxPoolLayer p;
      p.in_shape = shape;
      std::tie(p.kernel_h, p.kernel_w) = pair_field(need(j, "kernel", path), path + ".kernel");
      std::tie(p.stride_h, p.stride_w) = pair_field(need(j, "stride", path), path + ".stride");
      if (p.in_shape.size() == 3 && p.kernel_h > 0 && p.kernel_w > 0 && p.stride_h > 0 && p.stride_w > 0)
        p.out_shape = {p.in_shape[0], conv_out_extent(p.in_shape[1], p.kernel_h, p.stride_h, 0),
                       conv_out_extent(p.in_shape[2], p.kernel_w, p.stride_w, 0)};
      m.layers.emplace_back(std::move(p));
    } else if (type == "relu") {
      m.layers.emplace_back(ReluLayer{shape, qp.zero_point});
    } else {
      bad(path + ".type", "unknown layer type '" + type + "'");
    }
    shape = layer_output_shape(m.layers.back());
  }
  m.num_classes = shape_size(shape);
  validate_model(m);
  return m;
}

QuantModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

std::string serialize_model(const QuantModel& model) {
  json root;
  root["format_version"] = 1;
  root["input_shape"] = model.input_shape;
  json iq = qp_json(model.input_qp);
  iq["lb"] = model.input_bounds.lb;
  iq["ub"] = model.input_bounds.ub;
  root["input_quant"] = iq;
  root["rounding_mode"] = model.rounding == RoundingMode::kHalfUp ? "half_up" : "half_even";
  json layers = json::array();
  for (const Layer& layer : model.layers) {
    json j;
    if (const auto* l = std::get_if<QLinearLayer>(&layer)) {
      j = affine_json(*l);
      json w = json::array();
      for (int64_t r = 0; r < l->out_dim; ++r)
        w.push_back(std::vector<int64_t>(l->weight.begin() + r * l->in_dim,
                                         l->weight.begin() + (r + 1) * l->in_dim));
      j["type"] = "qlinear";
      j["weight"] = w;
    } else if (const auto* c = std::get_if<QConvLayer>(&layer)) {
      j = affine_json(*c);
      j["type"] = "qconv";
      const auto& k = c->kernel_shape;
      json w = json::array();
      size_t idx = 0;
      for (int64_t o = 0; o < k[0]; ++o) {
        json wo = json::array();
        for (int64_t ic = 0; ic < k[1]; ++ic) {
          json wi = json::array();
          for (int64_t y = 0; y < k[2]; ++y) {
            std::vector<int64_t> row(c->weight.begin() + idx, c->weight.begin() + idx + k[3]);
            idx += k[3];
            wi.push_back(row);
          }
          wo.push_back(wi);
        }
        w.push_back(wo);
      }
      j["weight"] = w;
      j["kernel_shape"] = c->kernel_shape;
      j["in_shape"] = c->in_shape;
      j["out_shape"] = c->out_shape;
      j["stride"] = {c->stride_h, c->stride_w};
      j["padding"] = {c->pad_h, c->pad_w};
    } else if (const auto* p = std::get_if<MaxPoolLayer>(&layer)) {
      j["type"] = "maxpool";
      j["kernel"] = {p->kernel_h, p->kernel_w};
      j["stride"] = {p->stride_h, p->stride_w};
    } else {
      j["type"] = "relu";
    }
    layers.push_back(j);
  }
  root["layers"] = layers;
  return root.dump(1);
}

}  // namespace qnnv
