// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "qnnv/fusion.hpp"
#include "qnnv/inference.hpp"
#include "qnnv/model_io.hpp"
#include "qnnv/requant.hpp"
#include "toy_nets.hpp"

using namespace qnnv;

namespace {

const char* kMinimal = R"({
  "format_version": 1,
  "input_shape": [2],
  "input_quant": {"scale": "0.5", "zero_point": 0, "lb": 0, "ub": 255},
  "layers": [
    {"type": "qlinear", "weight": [[1, 2], [3, -4]],
     "weight_quant": [{"scale": "0.25", "zero_point": 0}, {"scale": "0.125", "zero_point": 1}],
     "bias_acc": [10, -3],
     "output_quant": {"scale": "0.1", "zero_point": 0, "lb": -128, "ub": 127},
     "activation": "none"}
  ]
})";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const size_t at = s.find(from);
  REQUIRE(at != std::string::npos);
  return s.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("minimal file loads") {
  const QuantModel m = load_model(kMinimal);
  REQUIRE(m.layers.size() == 1);
  CHECK(m.num_classes == 2);
  const auto& l = std::get<QLinearLayer>(m.layers[0]);
  CHECK(l.w(1, 1) == -4);
  CHECK(l.weight_qp[1].zero_point == 1);
  CHECK(l.bias_acc == std::vector<int64_t>{10, -3});
  CHECK(l.input_qp == m.input_qp);
  CHECK(m.rounding == RoundingMode::kHalfUp);
}

TEST_CASE("invalid files are rejected") {
  CHECK_THROWS_AS(load_model(replace(kMinimal, R"("scale": "0.25")", R"("scale": "0")")), ModelError);
  CHECK_THROWS_AS(load_model(replace(kMinimal, R"("scale": "0.25")", R"("scale": 0.25)")), ParseError);
  CHECK_THROWS_AS(load_model(replace(kMinimal, R"("format_version": 1)", R"("format_version": 2)")), ParseError);
  CHECK_THROWS_AS(load_model(replace(kMinimal, R"("type": "qlinear")", R"("type": "dense")")), ParseError);
  CHECK_THROWS_AS(load_model(replace(kMinimal, "[3, -4]", "[3, -400]")), ModelError);
  CHECK_THROWS_AS(load_model("{ not json"), ParseError);

  // 3-wide output feeding a 4-wide layer.
  std::mt19937_64 rng(1);
  QuantModel m = qnnv::testing::random_toy_model(rng);
  auto& first = std::get<QLinearLayer>(m.layers[0]);
  first.out_dim = 3;
  first.weight.resize(static_cast<size_t>(3 * first.in_dim));
  first.weight_qp.resize(3);
  first.bias_acc.resize(3);
  for (Layer& layer : m.layers)
    if (auto* l = std::get_if<QLinearLayer>(&layer); l && l != &first) {
      l->in_dim = 4;
      l->weight.assign(static_cast<size_t>(l->out_dim * 4), 1);
      break;
    }
  CHECK_THROWS_AS(validate_model(m), ModelError);
}

TEST_CASE("serialize and load round trip") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const QuantModel m = qnnv::testing::random_toy_model(rng);
    const QuantModel back = load_model(serialize_model(m));
    CHECK(back == m);
  }
  // Shortest round-trip decimal strings keep every bit.
  for (double s : {0.1, 1.0 / 3.0, 0.00392156862745098, 6.103515625e-05})
    CHECK(parse_scale(format_scale(s)) == s);
}

TEST_CASE("batch norm fusion") {
  RealAffineLayer l{1, 1, {1.0}, {3.0}};
  SUBCASE("identity") {
    const RealAffineLayer f = fuse_batchnorm(l, {{1.0}, {0.0}, {0.0}, {1.0}, 0.0});
    CHECK(f.weight == l.weight);
    CHECK(f.bias == l.bias);
  }
  SUBCASE("pure scaling") {
    const RealAffineLayer f = fuse_batchnorm(l, {{2.0}, {0.0}, {0.0}, {1.0}, 0.0});
    CHECK(f.weight[0] == 2.0);
    CHECK(f.bias[0] == 6.0);
  }
  SUBCASE("channel mismatch") { CHECK_THROWS(fuse_batchnorm(l, {{1.0, 1.0}, {0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}})); }
  SUBCASE("random four channels against direct composition") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    RealAffineLayer r{4, 3, std::vector<double>(12), std::vector<double>(4)};
    BatchNormParams bn;
    for (double& w : r.weight) w = g(rng);
    for (int c = 0; c < 4; ++c) {
      r.bias[c] = g(rng);
      bn.gamma.push_back(g(rng));
      bn.beta.push_back(g(rng));
      bn.running_mean.push_back(g(rng));
      bn.running_var.push_back(std::abs(g(rng)) + 0.1);
    }
    const RealAffineLayer f = fuse_batchnorm(r, bn);
    for (int t = 0; t < 100; ++t) {
      double x[3] = {g(rng), g(rng), g(rng)};
      for (int c = 0; c < 4; ++c) {
        double lin = r.bias[c], fused = f.bias[c];
        for (int i = 0; i < 3; ++i) {
          lin += r.weight[c * 3 + i] * x[i];
          fused += f.weight[c * 3 + i] * x[i];
        }
        const double bn_out =
            bn.gamma[c] * (lin - bn.running_mean[c]) / std::sqrt(bn.running_var[c] + bn.epsilon) + bn.beta[c];
        CHECK(std::abs(fused - bn_out) <= 1e-9 * std::max(1.0, std::abs(bn_out)));
      }
    }
  }
}

TEST_CASE("relu fusion raises the clip lower bound") {
  AffineQuant a;
  a.out_bounds = kUint8Bounds;
  a.output_qp = {0.1, 0};
  fuse_relu(a);
  CHECK(a.fused_clip_lb == 0);

  AffineQuant b;
  b.out_bounds = kUint8Bounds;
  b.output_qp = {0.1, 57};
  fuse_relu(b);
  CHECK(b.activation == Activation::kReluFused);
  CHECK(b.fused_clip_lb == 57);

  for (int64_t z : {0, 57, 200})
    for (int64_t y = -300; y <= 600; ++y)
      CHECK(std::max(clip(y, 0, 255), z) == clip(y, std::max<int64_t>(0, z), 255));
}

TEST_CASE("fusing separate relu layers keeps integer outputs") {
  std::mt19937_64 rng(21);
  int fused_any = 0;
  for (int i = 0; i < 40; ++i) {
    const QuantModel m = qnnv::testing::random_toy_model(rng);
    const QuantModel f = qnnv::fuse_relu_layers(m);
    if (f.layers.size() < m.layers.size()) ++fused_any;
    validate_model(f);
    std::uniform_int_distribution<int64_t> px(m.input_bounds.lb, m.input_bounds.ub);
    for (int s = 0; s < 200; ++s) {
      std::vector<int64_t> x(static_cast<size_t>(m.input_size()));
      for (auto& v : x) v = px(rng);
      CHECK(forward(m, IntTensor(x)) == forward(f, IntTensor(x)));
    }
  }
  CHECK(fused_any > 0);
}
