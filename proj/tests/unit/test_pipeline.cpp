// SPDX-License-Identifier: Apache-2.0
#include <random>

#include "doctest.h"
#include "qnnv/inference.hpp"
#include "qnnv/pipeline.hpp"
#include "toy_nets.hpp"

using namespace qnnv;
using qnnv::testing::exhaustive_counterexample;
using qnnv::testing::random_query;
using qnnv::testing::random_toy_model;

namespace {

Verdict run(const Network& net, const RobustnessQuery& q, Mode mode) {
  VerifyOptions opts;
  opts.mode = mode;
  return verify(net, q, opts);
}

}  // namespace

TEST_CASE("radius zero at a correct center is robust in every mode") {
  std::mt19937_64 rng(3);
  const QuantModel m = random_toy_model(rng);
  const Network net = lower(m);
  const RobustnessQuery q = random_query(m, rng, 0);
  for (Mode mode : {Mode::kIlp, Mode::kIlpIn, Mode::kEqv}) CHECK(run(net, q, mode).status == Status::kRobust);
}

TEST_CASE("wrong label is reported as misclassified") {
  std::mt19937_64 rng(4);
  const QuantModel m = random_toy_model(rng);
  const Network net = lower(m);
  RobustnessQuery q = random_query(m, rng, 1);
  q.label = (q.label + 1) % m.num_classes;
  const Verdict v = run(net, q, Mode::kEqv);
  CHECK(v.status == Status::kMisclassified);
  CHECK(v.stage == StageKind::kPrecheck);
}

TEST_CASE("modes agree with exhaustive enumeration on toy nets") {
  std::mt19937_64 rng(11);
  int unsafe = 0, robust = 0;
  for (int i = 0; i < 60; ++i) {
    const QuantModel m = random_toy_model(rng);
    const Network net = lower(m);
    const RobustnessQuery q = random_query(m, rng, 1 + i % 2);
    const bool truth_unsafe = exhaustive_counterexample(net, q).has_value();
    (truth_unsafe ? unsafe : robust)++;
    for (Mode mode : {Mode::kIlp, Mode::kIlpIn, Mode::kEqv}) {
      const Verdict v = run(net, q, mode);
      INFO("instance " << i << " mode " << mode_name(mode) << " " << v.diagnostic);
      REQUIRE(v.status == (truth_unsafe ? Status::kUnsafe : Status::kRobust));
      if (v.witness) CHECK(validate_counterexample(net, q, *v.witness));
    }
  }
  MESSAGE("robust " << robust << " unsafe " << unsafe);
}
