#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "facediff/denoiser.hpp"
#include "facediff/errors.hpp"
#include "facediff/rng.hpp"
#include "support/grad_fixtures.hpp"

using namespace facediff;
using facediff::testing::random_tensor;

namespace {

DenoiserConfig tiny_config(int size = 16) {
  DenoiserConfig cfg;
  cfg.image_size = size;
  cfg.widths = {8, 16};
  cfg.time_dim = 16;
  cfg.seed = 3;
  return cfg;
}

std::vector<TrainItem> synthetic_items(int count, int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainItem> items;
  for (int i = 0; i < count; ++i) {
    TrainItem it{Tensor(size, size, 3), Tensor(size, size, 3)};
    const double phase = rng.uniform(0, 6.28);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        for (int c = 0; c < 3; ++c) {
          const double v = std::sin(0.4 * x + phase + c) * std::cos(0.3 * y);
          it.x0.at(y, x, c) = 0.8 * v;
          it.x_3d.at(y, x, c) = 0.5 + 0.4 * v;
        }
    items.push_back(std::move(it));
  }
  return items;
}

std::vector<double> flat_copy(const nn::ParamSet& ps) {
  return {ps.flat().begin(), ps.flat().end()};
}

}  // namespace

TEST_CASE("config validation") {
  DenoiserConfig cfg = tiny_config();
  cfg.image_size = 10;
  cfg.widths = {4, 4, 4};
  CHECK_THROWS_AS(Denoiser{cfg}, InvalidArgument);
  cfg.widths = {};
  CHECK_THROWS_AS(Denoiser{cfg}, InvalidArgument);
}

TEST_CASE("initialization is a pure function of config and seed") {
  Denoiser a(tiny_config());
  Denoiser b(tiny_config());
  CHECK(a.param_count() == b.param_count());
  CHECK(flat_copy(a.initial_params()) == flat_copy(b.initial_params()));
  auto cfg = tiny_config();
  cfg.seed = 4;
  CHECK(flat_copy(Denoiser(cfg).initial_params()) != flat_copy(a.initial_params()));
}

TEST_CASE("predict_noise at initialization is exactly zero with the input shape") {
  for (int size : {16, 32}) {
    Denoiser model(tiny_config(size));
    const auto ps = model.initial_params();
    Rng rng(1);
    const Tensor x = random_tensor(rng, size, size, 3);
    const auto emb = nn::time_embedding(100, 16);
    const auto pyr = extract_pyramid(model.pyramid(), ps, Tensor(size, size, 3, 0.5), emb);
    const auto eps = predict_noise(model, ps, x, pyr, emb);
    CHECK(eps.same_shape(x));
    for (double v : eps.data) CHECK(v == 0.0);
  }
}

TEST_CASE("predict_noise shape errors") {
  Denoiser model(tiny_config());
  const auto ps = model.initial_params();
  const auto emb = nn::time_embedding(1, 16);
  const auto pyr = extract_pyramid(model.pyramid(), ps, Tensor(16, 16, 3), emb);
  CHECK_THROWS_AS(predict_noise(model, ps, Tensor(8, 8, 3), pyr, emb), ShapeError);
  CHECK_THROWS_AS(predict_noise(model, ps, Tensor(16, 16, 3), FeaturePyramid{}, emb), ShapeError);
}

TEST_CASE("full denoiser gradient check") {
  auto f = facediff::testing::denoiser_fixture(5);
  CHECK(nn::grad_check(f.loss, f.params, {48, 1e-5, 7}) <= 1e-3);
}

TEST_CASE("diffusion loss at initialization equals mean(eps^2)") {
  Denoiser model(tiny_config(64));
  const auto ps = model.initial_params();
  const auto sched = make_schedule(1000, 1e-4, 0.02);
  Rng rng(8);
  const Tensor x0 = random_tensor(rng, 64, 64, 3, 0.5);
  const Tensor eps = rng.normal_tensor(64, 64, 3);
  const double loss = diffusion_loss(model, ps, x0, Tensor(64, 64, 3, 0.5), 300, eps, sched);
  double mean_sq = 0.0;
  for (double v : eps.data) mean_sq += v * v;
  mean_sq /= static_cast<double>(eps.size());
  CHECK(loss == doctest::Approx(mean_sq).epsilon(1e-12));
  // chi-square concentration: var(eps^2) = 2, so the standard error is sqrt(2 / n)
  CHECK(std::abs(loss - 1.0) <= 3.0 * std::sqrt(2.0 / static_cast<double>(eps.size())));
}

TEST_CASE("train_loop: steps = 0 returns the initialization") {
  Denoiser model(tiny_config());
  const auto sched = make_schedule(100, 1e-4, 0.02);
  TrainOptions opts;
  opts.steps = 0;
  const auto state = train_loop(synthetic_items(2, 16, 1), model, sched, opts);
  CHECK(flat_copy(state.params) == flat_copy(model.initial_params()));
  CHECK(state.step == 0);
  CHECK(state.loss_history.empty());
}

TEST_CASE("train_loop: deterministic, EMA rule, checkpoint cadence") {
  Denoiser model(tiny_config());
  const auto sched = make_schedule(100, 1e-4, 0.02);
  const auto data = synthetic_items(3, 16, 2);
  TrainOptions opts;
  opts.steps = 4;
  opts.batch_size = 2;
  opts.seed = 9;
  opts.checkpoint_every = 2;
  std::vector<std::int64_t> seen;
  const auto a = train_loop(data, model, sched, opts,
                            [&](const TrainState& s) { seen.push_back(s.step); });
  const auto b = train_loop(data, model, sched, opts);
  CHECK(flat_copy(a.params) == flat_copy(b.params));
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.loss_history.size() == 4);
  CHECK(seen == std::vector<std::int64_t>{2, 4});
}

TEST_CASE("apply_update keeps ema = d * ema + (1 - d) * params") {
  Denoiser model(tiny_config());
  TrainState state = initial_train_state(model);
  TrainOptions opts;
  Rng rng(4);
  std::vector<double> grads(state.params.count());
  for (int step = 0; step < 3; ++step) {
    for (double& g : grads) g = rng.normal();
    const auto ema_before = state.ema;
    apply_update(state, grads, opts);
    const auto p = state.params.flat();
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      worst = std::max(worst, std::abs(state.ema[i] - (0.999 * ema_before[i] + 0.001 * p[i])));
    }
    CHECK(worst <= 1e-12);
  }
  CHECK(state.step == 3);
}

TEST_CASE("train_loop rejects inconsistent data before training") {
  Denoiser model(tiny_config());
  const auto sched = make_schedule(100, 1e-4, 0.02);
  TrainOptions opts;
  opts.steps = 1;
  auto data = synthetic_items(2, 16, 1);
  data[1].x_3d = Tensor(8, 8, 3);
  CHECK_THROWS_AS(train_loop(data, model, sched, opts), InvalidArgument);
  CHECK_THROWS_AS(train_loop({}, model, sched, opts), InvalidArgument);
}

TEST_CASE("checkpoint round trip") {
  Denoiser model(tiny_config());
  TrainState state = initial_train_state(model);
  state.step = 17;
  const auto path = std::filesystem::temp_directory_path() / "facediff_ckpt_test.bin";
  write_checkpoint(path, state, 0xABCDEFull, "[model]\nimage_size = 16\n");
  const auto ck = read_checkpoint(path);
  CHECK(ck.step == 17);
  CHECK(ck.config_digest == 0xABCDEFull);
  CHECK(ck.config_text == "[model]\nimage_size = 16\n");
  REQUIRE(ck.params.size() == state.params.count());
  for (std::size_t i = 0; i < ck.params.size(); ++i) {
    CHECK(ck.params[i] == static_cast<float>(state.params.flat()[i]));
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_checkpoint(path), IoError);
}
