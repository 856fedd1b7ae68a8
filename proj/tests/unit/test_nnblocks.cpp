#include <cmath>
#include <vector>

#include "doctest.h"
#include "facediff/errors.hpp"
#include "facediff/nn/blocks.hpp"
#include "facediff/rng.hpp"
#include "support/grad_fixtures.hpp"

using namespace facediff;
using namespace facediff::nn;
using facediff::testing::random_tensor;

TEST_CASE("time embedding is deterministic and bounded") {
  const auto a = time_embedding(123);
  const auto b = time_embedding(123);
  CHECK(a.data == b.data);
  CHECK(a.channels == kDefaultTimeDim);
  for (double v : a.data) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  CHECK(time_embedding(124).data != a.data);
  CHECK_THROWS_AS(time_embedding(1, 7), InvalidArgument);
}

TEST_CASE("ParamSet: flat view, lookup and deterministic init") {
  ParamSet ps;
  auto a = ps.add("a", {2, 3}, ParamInit::normal());
  auto b = ps.add("b", {4}, ParamInit::ones());
  CHECK(ps.count() == 10);
  CHECK(ps.entry(b).offset == 6);
  CHECK(ps.find("b") == b.index);
  CHECK_THROWS_AS(ps.add("a", {1}, ParamInit::zeros()), InvalidArgument);
  CHECK_THROWS_AS(ps.add("c", {3}, ParamInit::explicit_values({1.0})), ShapeError);

  ps.initialize(42);
  ParamSet other = ps;
  other.initialize(42);
  CHECK(std::vector<double>(ps.flat().begin(), ps.flat().end()) ==
        std::vector<double>(other.flat().begin(), other.flat().end()));
  for (double v : ps.values(a)) CHECK(std::abs(v) <= 0.04);
  for (double v : ps.values(b)) CHECK(v == 1.0);

  std::vector<double> flat(ps.flat().begin(), ps.flat().end());
  flat[7] = 3.25;
  ps.assign(flat);
  CHECK(ps.values(b)[1] == 3.25);
  CHECK_THROWS_AS(ps.assign(std::vector<double>(3)), ShapeError);
}

TEST_CASE("resblock: identity when only the skip path is active") {
  ParamSet ps;
  auto block = ResBlock::create(ps, "rb", 8, 8);
  ps.initialize(1);
  for (double& v : ps.flat()) v = 0.0;
  Rng rng(2);
  const Tensor x = random_tensor(rng, 6, 6, 8);
  Graph g(&ps);
  const auto out = block.forward(g, g.constant(x), g.constant(time_embedding(10)));
  CHECK(g.value(out).data == x.data);
}

TEST_CASE("resblock: shape contract and channel mismatch") {
  ParamSet ps;
  auto block = ResBlock::create(ps, "rb", 3, 16);
  ps.initialize(1);
  Rng rng(2);
  Graph g(&ps);
  const auto out = block.forward(g, g.constant(random_tensor(rng, 8, 4, 3)),
                                 g.constant(time_embedding(10)));
  CHECK(g.value(out).height == 8);
  CHECK(g.value(out).width == 4);
  CHECK(g.value(out).channels == 16);
  CHECK(g.value(out).all_finite());
  CHECK_THROWS_AS(block.forward(g, g.constant(random_tensor(rng, 8, 8, 4)),
                                g.constant(time_embedding(10))),
                  ShapeError);
}

TEST_CASE("resblock gradients match finite differences") {
  for (auto [cin, cout] : {std::pair{4, 4}, std::pair{3, 8}}) {
    auto f = facediff::testing::resblock_fixture(cin, cout, 7);
    CHECK(grad_check(f.loss, f.params, {64, 1e-5, 1}) <= 1e-4);
  }
}

TEST_CASE("layernorm2d") {
  Rng rng(4);
  SUBCASE("already normalized input is unchanged") {
    Tensor x(3, 3, 4);
    for (std::size_t p = 0; p < x.pixels(); ++p) {
      const double s = rng.uniform(-1, 1) > 0 ? 1.0 : -1.0;
      const double vals[4] = {s, -s, 1.0, -1.0};
      for (int k = 0; k < 4; ++k) x.data[p * 4 + k] = vals[k];
    }
    const auto y = layernorm2d(x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y.data[i] - x.data[i]) < 1e-3);
  }
  SUBCASE("constant input maps to zero") {
    const auto y = layernorm2d(Tensor(4, 4, 8, 3.5));
    for (double v : y.data) CHECK(std::abs(v) < 1e-12);
  }
  SUBCASE("per-location mean vanishes") {
    const auto y = layernorm2d(random_tensor(rng, 5, 5, 16, 3.0));
    for (std::size_t p = 0; p < y.pixels(); ++p) {
      double mean = 0.0;
      for (int k = 0; k < 16; ++k) mean += y.data[p * 16 + k];
      CHECK(std::abs(mean / 16) <= 1e-6);
    }
  }
}

TEST_CASE("layernorm2d gradient with respect to its input") {
  // A parameter leaf is a 1 x 1 x C vector, i.e. a single spatial location,
  // which is exactly the unit the normalization acts on.
  ParamSet ps;
  ps.add("x", {12}, ParamInit::normal(1.0));
  ps.initialize(8);
  Rng rng(9);
  const Tensor w = random_tensor(rng, 1, 1, 12);
  LossFn loss = [w](const ParamSet& p, std::span<double> grads) {
    Graph g(&p);
    const NodeId out = g.dot(layernorm2d(g, g.param(ParamHandle{0})), w);
    if (!grads.empty()) g.backward(out, grads);
    return g.value(out).data[0];
  };
  CHECK(grad_check(loss, ps, {12, 1e-5, 0}) <= 1e-4);
}

TEST_CASE("channel squeeze") {
  ParamSet ps;
  auto cs = ChannelSqueeze::create(ps, "cs", 8);
  ps.initialize(3);
  Rng rng(5);
  const Tensor x = random_tensor(rng, 4, 4, 8, 10.0);
  SUBCASE("zero MLP gives one half everywhere") {
    for (double& v : ps.flat()) v = 0.0;
    Graph g(&ps);
    for (double v : g.value(cs.forward(g, g.constant(x))).data) CHECK(v == 0.5);
  }
  SUBCASE("weights lie strictly inside (0, 1)") {
    ps.randomize(9, 1.0);
    Graph g(&ps);
    const auto& w = g.value(cs.forward(g, g.constant(x)));
    CHECK(w.channels == 8);
    for (double v : w.data) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  SUBCASE("gradient check") {
    auto f = facediff::testing::squeeze_fixture(8, 12);
    CHECK(grad_check(f.loss, f.params, {64, 1e-5, 2}) <= 1e-4);
  }
}

TEST_CASE("feed-forward network") {
  ParamSet ps;
  auto ffn = FeedForward::create(ps, "ffn", 6);
  ps.initialize(3);
  Rng rng(6);
  const Tensor x = random_tensor(rng, 5, 3, 6);
  SUBCASE("zero weights give zero output") {
    for (double& v : ps.flat()) v = 0.0;
    Graph g(&ps);
    for (double v : g.value(ffn.forward(g, g.constant(x))).data) CHECK(v == 0.0);
  }
  SUBCASE("shape is preserved") {
    Graph g(&ps);
    const auto& y = g.value(ffn.forward(g, g.constant(x)));
    CHECK(y.same_shape(x));
    CHECK_THROWS_AS(ffn.forward(g, g.constant(Tensor(2, 2, 5))), ShapeError);
  }
  SUBCASE("gradient check") {
    auto f = facediff::testing::ffn_fixture(6, 13);
    CHECK(grad_check(f.loss, f.params, {64, 1e-5, 3}) <= 1e-4);
  }
}

TEST_CASE("grad_check on a quadratic") {
  ParamSet ps;
  ps.add("p", {5}, ParamInit::zeros());
  ps.assign(std::vector<double>{0.5, -1.0, 1.5, -2.0, 2.5});
  LossFn quad = [](const ParamSet& p, std::span<double> grads) {
    double acc = 0.0;
    const auto v = p.flat();
    for (std::size_t i = 0; i < v.size(); ++i) {
      acc += v[i] * v[i];
      if (!grads.empty()) grads[i] += 2.0 * v[i];
    }
    return acc;
  };
  CHECK(grad_check(quad, ps, {5, 1e-5, 0}) <= 1e-8);

  LossFn broken = [](const ParamSet&, std::span<double>) { return std::nan(""); };
  CHECK_THROWS_AS(grad_check(broken, ps), NumericError);
}

TEST_CASE("blocks keep outputs finite") {
  ParamSet ps;
  auto rb = ResBlock::create(ps, "rb", 4, 8);
  auto cs = ChannelSqueeze::create(ps, "cs", 8);
  auto ffn = FeedForward::create(ps, "ffn", 8);
  ps.randomize(17, 1.0);
  Rng rng(18);
  for (int trial = 0; trial < 5; ++trial) {
    Graph g(&ps);
    const auto x = g.constant(random_tensor(rng, 4, 4, 4, 5.0));
    const auto h = rb.forward(g, x, g.constant(time_embedding(trial * 100 + 1)));
    CHECK(g.value(h).all_finite());
    CHECK(g.value(cs.forward(g, h)).all_finite());
    CHECK(g.value(ffn.forward(g, h)).all_finite());
  }
}
