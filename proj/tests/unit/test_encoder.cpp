// SPDX-License-Identifier: Apache-2.0
#include <functional>
#include <random>
#include <set>
#include <tuple>

#include "doctest.h"
#include "qnnv/encoder.hpp"
#include "qnnv/inference.hpp"
#include "qnnv/interval.hpp"
#include "oracles.hpp"
#include "toy_nets.hpp"

using namespace qnnv;
using qnnv::testing::expected_points;
using qnnv::testing::feasible_outputs;
using qnnv::testing::gadget_points;

namespace {

int64_t half_up(const Requantizer& rq, int64_t acc) { return rq.round(acc, RoundingMode::kHalfUp); }

}  // namespace

TEST_CASE("input variables are clipped balls") {
  Network net;
  net.input_size = 2;
  net.input_bounds = kUint8Bounds;
  RobustnessQuery q;
  q.center = IntTensor({0, 200});
  q.radius = 4;
  ILPModel m;
  auto ids = encode_input(m, net, q);
  CHECK(m.var(ids[0]).lo == 0);
  CHECK(m.var(ids[0]).hi == 4);
  q.radius = 8;
  ILPModel m2;
  ids = encode_input(m2, net, q);
  CHECK(m2.var(ids[1]).lo == 192);
  CHECK(m2.var(ids[1]).hi == 208);
  q.radius = 0;
  ILPModel m3;
  ids = encode_input(m3, net, q);
  CHECK(m3.var(ids[1]).lo == 200);
  CHECK(m3.var(ids[1]).hi == 200);
}

TEST_CASE("max and min gadgets with constants") {
  SUBCASE("max of 5 and 3") {
    ILPModel m;
    const int x = m.add_var("x", VarKind::kInteger, 5, 5);
    const Operand z = encode_max(m, "z", Operand::variable(x), Operand::constant(3), Interval{-20, 20});
    std::set<std::tuple<int64_t, int64_t, int64_t>> sols;
    for (int64_t zv = -20; zv <= 20; ++zv)
      for (int b = 0; b < 4; ++b)
        if (m.check_exact({5, zv, b & 1, b >> 1})) sols.insert({zv, b & 1, b >> 1});
    REQUIRE(sols.size() == 1);
    CHECK(*sols.begin() == std::tuple<int64_t, int64_t, int64_t>{5, 1, 0});
    CHECK(z.var == 1);
  }
  SUBCASE("max tie admits both selectors") {
    ILPModel m;
    const int x = m.add_var("x", VarKind::kInteger, 4, 4);
    encode_max(m, "z", Operand::variable(x), Operand::constant(4), Interval{0, 10});
    int count = 0;
    for (int64_t zv = 0; zv <= 10; ++zv)
      for (int b = 0; b < 4; ++b)
        if (m.check_exact({4, zv, b & 1, b >> 1})) {
          CHECK(zv == 4);
          ++count;
        }
    CHECK(count == 2);
  }
  SUBCASE("min of 5 and 3") {
    ILPModel m;
    const int x = m.add_var("x", VarKind::kInteger, 5, 5);
    encode_min(m, "z", Operand::variable(x), Operand::constant(3), Interval{-20, 20});
    std::set<int64_t> zs;
    for (int64_t zv = -20; zv <= 20; ++zv)
      for (int b = 0; b < 4; ++b)
        if (m.check_exact({5, zv, b & 1, b >> 1})) zs.insert(zv);
    CHECK(zs == std::set<int64_t>{3});
  }
  SUBCASE("one variable against a constant") {
    for (bool is_max : {true, false}) {
      ILPModel m;
      const int x = m.add_var("x", VarKind::kInteger, 0, 10);
      const Operand z = is_max ? encode_max(m, "z", Operand::variable(x), Operand::constant(7))
                               : encode_min(m, "z", Operand::variable(x), Operand::constant(7));
      for (int64_t xv = 0; xv <= 10; ++xv)
        CHECK(feasible_outputs(m, x, xv, z) == std::set<int64_t>{is_max ? std::max<int64_t>(xv, 7) : std::min<int64_t>(xv, 7)});
    }
  }
}

TEST_CASE("gadget feasible sets equal max and min on grids") {
  const Interval grids[][2] = {{{-10, 10}, {-10, 10}}, {{0, 20}, {-5, 15}}, {{3, 3}, {-10, 10}}, {{-4, 6}, {2, 9}}};
  for (const auto& g : grids) {
    CHECK(gadget_points(true, g[0], g[1]) == expected_points(true, g[0], g[1]));
    CHECK(gadget_points(false, g[0], g[1]) == expected_points(false, g[0], g[1]));
  }
}

TEST_CASE("clip as two relus equals clip") {
  for (bool phases : {false, true}) {
    ILPModel m;
    const int x = m.add_var("x", VarKind::kInteger, -512, 512);
    const Operand out = encode_clip(m, "n.", "yq", Operand::variable(x), 0, 255, phases);
    for (int64_t v = -512; v <= 512; ++v) REQUIRE(feasible_outputs(m, x, v, out) == std::set<int64_t>{clip(v, 0, 255)});
  }
}

TEST_CASE("clip of fixed inputs") {
  for (auto [v, want] : {std::pair<int64_t, int64_t>{300, 255}, {-5, 0}, {17, 17}}) {
    ILPModel m;
    const int x = m.add_var("x", VarKind::kInteger, -600, 600);
    const Operand out = encode_clip(m, "n.", "yq", Operand::variable(x), 0, 255, false);
    CHECK(feasible_outputs(m, x, v, out) == std::set<int64_t>{want});
  }
}

TEST_CASE("always-linear clip is one equality") {
  ILPModel m;
  const int x = m.add_var("x", VarKind::kInteger, 10, 20);
  const Operand out = encode_clip(m, "n.", "yq", Operand::variable(x), 0, 255, true);
  CHECK(m.num_constraints() == 1);
  CHECK(m.constraints()[0].cmp == Cmp::kEq);
  for (const Var& v : m.vars()) CHECK(v.kind == VarKind::kInteger);
  CHECK(m.var(out.var).lo == 10);
  CHECK(m.var(out.var).hi == 20);
  // Fully saturated phases fold to constants.
  ILPModel lo_m;
  const int y = lo_m.add_var("y", VarKind::kInteger, -40, -10);
  CHECK(encode_clip(lo_m, "n.", "yq", Operand::variable(y), 0, 255, true).value == 0);
}

TEST_CASE("rounding rows pick out the half-up integer") {
  SUBCASE("worked example") {
    // f = 0.25, z = 3, acc = 2*4 - 1*2 = 6: yhat0 = 4.5 rounds to 5.
    AffineNeuron n{{{0, 2}, {1, -1}}, 0, Requantizer(0.25, 3)};
    ILPModel m;
    const int a = m.add_var("a", VarKind::kInteger, 4, 4);
    const int b = m.add_var("b", VarKind::kInteger, 2, 2);
    const Operand ins[] = {Operand::variable(a), Operand::variable(b)};
    const RoundSlack sl = round_slack(n.requant, 6, 6, RoundingMode::kHalfUp);
    const Operand y = encode_affine_round(m, "y", n, 0, ins, {-100, 100}, sl);
    std::set<int64_t> sols;
    for (int64_t v = -100; v <= 100; ++v)
      if (m.check_exact({4, 2, v})) sols.insert(v);
    CHECK(sols == std::set<int64_t>{5});
    CHECK(y.var == 2);
  }
  SUBCASE("integer pass-through") {
    AffineNeuron n{{{0, 1}}, 0, Requantizer(1.0, 0)};
    ILPModel m;
    const int a = m.add_var("a", VarKind::kInteger, 7, 7);
    const Operand ins[] = {Operand::variable(a)};
    encode_affine_round(m, "y", n, 0, ins, {-100, 100}, round_slack(n.requant, 7, 7, RoundingMode::kHalfUp));
    std::set<int64_t> sols;
    for (int64_t v = -100; v <= 100; ++v)
      if (m.check_exact({7, v})) sols.insert(v);
    CHECK(sols == std::set<int64_t>{7});
  }
  SUBCASE("constant inputs fold to a constant") {
    AffineNeuron n{{{0, 2}}, 1, Requantizer(0.25, 0)};
    ILPModel m;
    const Operand ins[] = {Operand::constant(4)};
    const Operand y = encode_affine_round(m, "y", n, 0, ins, {-100, 100}, {});
    CHECK(y.is_const());
    CHECK(y.value == 2);  // 9 / 4 = 2.25
    CHECK(m.num_vars() == 0);
  }
}

TEST_CASE("random lattice values have a unique feasible rounding") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> fd(0.001, 1.0);
  std::uniform_int_distribution<int64_t> zd(-20, 20), kd(-100000, 100000);
  int failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const double f = fd(rng);
    const int64_t z = zd(rng), k = kd(rng);
    AffineNeuron n{{{0, 1}}, 0, Requantizer(f, z)};
    // The slack covers a whole accumulator range around k, as in a real query.
    const RoundSlack sl = round_slack(n.requant, k - 50, k + 50, RoundingMode::kHalfUp);
    ILPModel m;
    const int a = m.add_var("a", VarKind::kInteger, static_cast<double>(k - 50), static_cast<double>(k + 50));
    const Operand ins[] = {Operand::variable(a)};
    encode_affine_round(m, "y", n, 0, ins, {-1e7, 1e7}, sl);
    const int64_t want = half_up(n.requant, k);
    int feasible = 0;
    bool has_want = false;
    for (int64_t v = want - 3; v <= want + 3; ++v)
      if (m.check_exact({k, v})) {
        ++feasible;
        has_want |= v == want;
      }
    failures += !(feasible == 1 && has_want);
  }
  CHECK(failures == 0);
}

TEST_CASE("misclassification rows") {
  ILPModel m;
  const int o0 = m.add_var("o0", VarKind::kInteger, -10, 10);
  const int o1 = m.add_var("o1", VarKind::kInteger, -10, 10);
  const Operand logits[] = {Operand::variable(o0), Operand::variable(o1)};
  encode_misclassification(m, logits, 0, 1);
  const LinConstraint& c = m.constraints()[0];
  CHECK(c.cmp == Cmp::kGe);
  CHECK(c.rhs == 1.0);
  CHECK(m.check_exact({2, 3}));
  CHECK_FALSE(m.check_exact({3, 3}));

  ILPModel m2;
  m2.add_var("o0", VarKind::kInteger, -10, 10);
  m2.add_var("o1", VarKind::kInteger, -10, 10);
  encode_misclassification(m2, logits, 1, 0);
  CHECK(m2.constraints()[0].rhs == 0.0);
  CHECK(m2.check_exact({3, 3}));
  CHECK_FALSE(m2.check_exact({2, 3}));
  CHECK_THROWS_AS(encode_misclassification(m2, logits, 1, 1), EncodeError);
}

TEST_CASE("one ILP per target") {
  std::mt19937_64 rng(12);
  qnnv::testing::ToyOptions opts;
  opts.min_outputs = opts.max_outputs = 10;
  const QuantModel m = qnnv::testing::random_toy_model(rng, opts);
  const Network net = lower(m);
  const RobustnessQuery q = qnnv::testing::random_query(m, rng, 1);
  const BoundsTable b = structural_bounds(net, q);
  const auto all = encode_query(net, q, b);
  CHECK(all.size() == 9);
  for (const TargetILP& t : all) CHECK(t.target != q.label);
  const auto pruned = encode_query(net, q, b, {}, std::vector<int64_t>{(q.label + 1) % 10, (q.label + 2) % 10});
  CHECK(pruned.size() == 2);
}

TEST_CASE("half-even models are rejected by the encoder") {
  std::mt19937_64 rng(14);
  QuantModel m = qnnv::testing::random_toy_model(rng);
  m.rounding = RoundingMode::kHalfEven;
  const Network net = lower(m);
  const RobustnessQuery q = qnnv::testing::random_query(m, rng, 1);
  CHECK_THROWS_AS(encode_network(net, q, structural_bounds(net, q)), EncodeError);
}
