#include "facediff/restore.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "facediff/degrade.hpp"
#include "facediff/errors.hpp"
#include "facediff/image_io.hpp"
#include "facediff/rng.hpp"

namespace facediff {

namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

GaussianDenoiseRestorer::GaussianDenoiseRestorer(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian-denoise sigma must be positive");
}

Tensor GaussianDenoiseRestorer::restore(const Tensor& x_lq) const { return gaussian_blur(x_lq, sigma_); }

Tensor ExternalFileRestorer::restore(const Tensor& x_lq) const {
  if (!std::filesystem::exists(path_)) throw IoError("initial restoration not found: " + path_.string());
  Tensor img = read_png(path_);
  if (!img.same_shape(x_lq)) {
    throw ShapeError("initial restoration " + path_.string() + " is " + img.shape_string() + ", input is " +
                     x_lq.shape_string());
  }
  return img;
}

InitialRestoreResult initial_restore(const Tensor& x_lq, const InitialRestorer& restorer) {
  InitialRestoreResult r{restorer.restore(x_lq), restorer.name()};
  require_same_shape(r.image, x_lq, "initial_restore");
  if (!r.image.all_finite()) throw NumericError(restorer.name() + " restorer produced non-finite values");
  for (double& v : r.image.data) v = std::clamp(v, 0.0, 1.0);
  return r;
}

RestoreResult truncated_restore(const Tensor& x_init, const Tensor& x_3d, const Denoiser& model,
                                const nn::ParamSet& params, const NoiseSchedule& sched, int truncation,
                                std::uint64_t seed) {
  if (truncation < 0 || truncation > sched.steps()) {
    throw InvalidArgument("truncation step " + std::to_string(truncation) + " outside [0, " +
                          std::to_string(sched.steps()) + "]");
  }
  const int size = model.config().image_size;
  if (x_init.height != size || x_init.width != size || x_init.channels != 3) {
    throw ShapeError("restore input " + x_init.shape_string() + " does not match model resolution " +
                     std::to_string(size));
  }
  require_same_shape(x_init, x_3d, "truncated_restore prior");
  if (params.count() != model.param_count()) throw ShapeError("parameter layout mismatch");

  RestoreResult result;
  result.gamma.resize(static_cast<std::size_t>(model.config().levels()));
  if (truncation == 0) {
    result.image = x_init;
    return result;
  }

  Rng rng(mix_seed(seed, 0x7e5));
  LatentImage x = q_sample(to_model_space(x_init), truncation, rng.normal_tensor(size, size, 3), sched);
  const auto& fusion = model.fusion_blocks();
  for (int t = truncation; t >= 1; --t) {
    nn::Graph g(&params);
    const auto temb = g.constant(nn::time_embedding(t, model.config().time_dim));
    const auto pyramid = model.guidance(g, g.constant(x_3d), temb);
    const auto pred = model.forward(g, g.constant(x), pyramid, temb);
    for (std::size_t level = 0; level < fusion.size(); ++level) {
      const auto w = unpack_time_weights(g.value(pred.time_weights[level]).data, fusion[level].channels());
      result.gamma[level].push_back({t, mean(w.alpha1), mean(w.beta1), w.gamma1, w.gamma2, w.gamma3});
    }
    const LatentImage z = rng.normal_tensor(size, size, 3);
    x = reverse_step(x, g.value(pred.eps), t, z, t == 1 ? SigmaMode::kZero : SigmaMode::kBeta, sched);
    if (!x.all_finite()) throw NumericError("non-finite sample at reverse step t=" + std::to_string(t));
  }
  result.image = from_model_space(x);
  return result;
}

std::vector<std::filesystem::path> write_gamma_logs(const std::filesystem::path& prefix,
                                                    const std::vector<std::vector<GammaLogRow>>& logs) {
  std::vector<std::filesystem::path> paths;
  char buf[160];
  for (std::size_t level = 0; level < logs.size(); ++level) {
    std::filesystem::path path = prefix;
    path += "_level" + std::to_string(level) + ".csv";
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write gamma log " + path.string());
    os << "t,alpha1_mean,beta1_mean,gamma1,gamma2,gamma3\n";
    for (const auto& r : logs[level]) {
      std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.t, r.alpha1_mean, r.beta1_mean, r.gamma1,
                    r.gamma2, r.gamma3);
      os << buf;
    }
    if (!os) throw IoError("failed writing gamma log " + path.string());
    paths.push_back(std::move(path));
  }
  return paths;
}

}  // namespace facediff
