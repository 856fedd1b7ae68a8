#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "facediff/cli.hpp"
#include "facediff/config.hpp"
#include "facediff/degrade.hpp"
#include "facediff/metrics.hpp"
#include "facediff/morphable3d.hpp"
#include "facediff/rng.hpp"
#include "facediff/schedule.hpp"
#include "facediff/synth.hpp"

namespace facediff::cli {
namespace {

bool schedule_products() {
  const auto s = make_schedule(1000, 1e-4, 0.02);
  double prod = 1.0, worst = 0.0;
  for (int t = 1; t <= s.steps(); ++t) {
    prod *= 1.0 - s.beta(t);
    worst = std::max(worst, std::abs(prod - s.alpha_bar(t)));
  }
  return worst <= 1e-12;
}

// sigma = 0 with the noise consistent with x0 walks x_T back to x0.
bool oracle_chain() {
  const auto s = make_schedule(1000, 1e-4, 0.02);
  Rng rng(1);
  const Tensor x0 = rng.normal_tensor(4, 4, 3);
  Tensor x = q_sample(x0, s.steps(), rng.normal_tensor(4, 4, 3), s);
  const Tensor zero(4, 4, 3);
  for (int t = s.steps(); t >= 1; --t) {
    Tensor eps = x;
    const double a = std::sqrt(s.alpha_bar(t)), b = std::sqrt(1.0 - s.alpha_bar(t));
    for (std::size_t i = 0; i < eps.data.size(); ++i) eps.data[i] = (x.data[i] - a * x0.data[i]) / b;
    x = reverse_step(x, eps, t, zero, SigmaMode::kZero, s);
  }
  double err = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) err = std::max(err, std::abs(x.data[i] - x0.data[i]));
  return err <= 1e-6;
}

bool sh_band0() { return std::abs(sh_basis(Eigen::Vector3d(0, 0, 1))[0] - 0.28209479177387814) <= 1e-15; }

Tensor sample_image(int size, std::uint64_t seed) {
  const auto model = synth_prior_model(seed, 256);
  return synth_face_image(model, random_coeffs(seed, model), size, seed);
}

bool zero_coeffs_mean_face() {
  const auto model = synth_prior_model(2, 256);
  const Coeff3DMM zero;
  const auto verts = shape_from_coeffs(model, zero);
  return (verts - model.mean_shape).cwiseAbs().maxCoeff() == 0.0;
}

bool metric_identities() {
  const Tensor a = sample_image(32, 3);
  Tensor b = a;
  for (double& v : b.data) v += 0.1;
  return ssim(a, a) == 1.0 && std::abs(psnr(a, b) - 20.0) <= 1e-9;
}

bool frechet_self() {
  std::vector<Tensor> set;
  for (std::uint64_t i = 0; i < 4; ++i) set.push_back(sample_image(16, 10 + i));
  const auto st = feature_stats(set, FeatureExtractor::kPixels16);
  return frechet_distance(st, st) <= 1e-8;
}

bool degrade_deterministic() {
  const Tensor y = sample_image(32, 4);
  const DegradationParams p{1.5, 4.0, 5.0, 50};
  return degrade_pipeline(y, p, 9).data == degrade_pipeline(y, p, 9).data;
}

bool config_round_trip() {
  RunConfig c;
  c.train.learning_rate = 0.1 + 0.2;
  c.degrade.seed = 12345678901234ULL;
  const RunConfig back = parse_config(c.serialize());
  return back == c && back.digest() == c.digest();
}

}  // namespace

int run_selftest(std::ostream& out) {
  const std::vector<std::pair<const char*, std::function<bool()>>> checks{
      {"schedule alpha_bar products", schedule_products},
      {"oracle reverse chain", oracle_chain},
      {"spherical harmonics band 0", sh_band0},
      {"zero coefficients give the mean shape", zero_coeffs_mean_face},
      {"ssim identity and psnr 20 dB", metric_identities},
      {"frechet distance of identical stats", frechet_self},
      {"degradation determinism", degrade_deterministic},
      {"config round trip", config_round_trip},
  };
  int failures = 0;
  for (const auto& [name, fn] : checks) {
    bool ok = false;
    std::string why;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      why = std::string(" (") + e.what() + ")";
    }
    out << (ok ? "PASS " : "FAIL ") << name << why << "\n";
    failures += ok ? 0 : 1;
  }
  return failures;
}

}  // namespace facediff::cli
