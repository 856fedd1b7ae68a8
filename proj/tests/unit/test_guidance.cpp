#include "doctest.h"
#include "facediff/errors.hpp"
#include "facediff/guidance.hpp"
#include "support/grad_fixtures.hpp"

using namespace facediff;

TEST_CASE("pyramid level sizes") {
  SUBCASE("single level keeps the resolution") {
    nn::ParamSet ps;
    auto pyr = GuidancePyramid::create(ps, "p", {8});
    ps.initialize(1);
    const auto levels = extract_pyramid(pyr, ps, Tensor(16, 16, 3, 0.5), nn::time_embedding(3));
    REQUIRE(levels.size() == 1);
    CHECK(levels[0].height == 16);
    CHECK(levels[0].channels == 8);
  }
  SUBCASE("four levels on 64 x 64 halve each time") {
    nn::ParamSet ps;
    auto pyr = GuidancePyramid::create(ps, "p", {32, 64, 128, 128});
    ps.initialize(1);
    const auto levels = extract_pyramid(pyr, ps, Tensor(64, 64, 3, 0.5), nn::time_embedding(3));
    REQUIRE(levels.size() == 4);
    const int sizes[] = {64, 32, 16, 8};
    const int widths[] = {32, 64, 128, 128};
    for (int i = 0; i < 4; ++i) {
      CHECK(levels[i].height == sizes[i]);
      CHECK(levels[i].width == sizes[i]);
      CHECK(levels[i].channels == widths[i]);
    }
  }
}

TEST_CASE("pyramid rejects indivisible sizes") {
  nn::ParamSet ps;
  auto pyr = GuidancePyramid::create(ps, "p", {4, 4, 4});
  ps.initialize(1);
  CHECK_THROWS_AS(extract_pyramid(pyr, ps, Tensor(10, 12, 3), nn::time_embedding(1)), ShapeError);
}

TEST_CASE("pyramid is deterministic and depends on t") {
  nn::ParamSet ps;
  auto pyr = GuidancePyramid::create(ps, "p", {8, 8});
  ps.initialize(2);
  Rng rng(3);
  Tensor x(8, 8, 3);
  for (double& v : x.data) v = rng.uniform();
  const auto a = extract_pyramid(pyr, ps, x, nn::time_embedding(40));
  const auto b = extract_pyramid(pyr, ps, x, nn::time_embedding(40));
  const auto c = extract_pyramid(pyr, ps, x, nn::time_embedding(41));
  CHECK(a[1].data == b[1].data);
  CHECK(a[1].data != c[1].data);
}

TEST_CASE("pyramid gradient") {
  auto f = facediff::testing::pyramid_fixture(41);
  CHECK(nn::grad_check(f.loss, f.params, {96, 1e-5, 6}) <= 1e-4);
}
