#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "facediff/denoiser.hpp"
#include "facediff/morphable3d.hpp"

namespace facediff {

/// Produces a first restoration x_init from a low-quality [0, 1] image.
class InitialRestorer {
 public:
  virtual ~InitialRestorer() = default;
  virtual std::string name() const = 0;
  virtual Tensor restore(const Tensor& x_lq) const = 0;
};

class IdentityRestorer final : public InitialRestorer {
 public:
  std::string name() const override { return "identity"; }
  Tensor restore(const Tensor& x_lq) const override { return x_lq; }
};

/// Gaussian smoothing baseline for noise-dominated inputs.
class GaussianDenoiseRestorer final : public InitialRestorer {
 public:
  explicit GaussianDenoiseRestorer(double sigma = 1.0);
  std::string name() const override { return "gaussian-denoise"; }
  Tensor restore(const Tensor& x_lq) const override;

 private:
  double sigma_;
};

/// Reads a precomputed restoration from a PNG file.
class ExternalFileRestorer final : public InitialRestorer {
 public:
  explicit ExternalFileRestorer(std::filesystem::path path) : path_(std::move(path)) {}
  std::string name() const override { return "external-file"; }
  Tensor restore(const Tensor& x_lq) const override;

 private:
  std::filesystem::path path_;
};

struct InitialRestoreResult {
  Tensor image;
  std::string restorer;
};

/// Runs the restorer and checks the shape/range contract (output is clamped).
InitialRestoreResult initial_restore(const Tensor& x_lq, const InitialRestorer& restorer);

struct GammaLogRow {
  int t = 0;
  double alpha1_mean = 0.0;
  double beta1_mean = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma3 = 0.0;
};

struct RestoreResult {
  Tensor image;                                 ///< [0, 1]
  std::vector<std::vector<GammaLogRow>> gamma;  ///< gamma[level][step], steps N..1
};

/// Truncated reverse diffusion: x_N = q_sample(x_init, N, eps), then N guided
/// reverse steps (sigma = sqrt(beta_t), zero at t = 1). The guidance pyramid
/// is recomputed at every step. x_init and x_3d are [0, 1] images.
RestoreResult truncated_restore(const Tensor& x_init, const Tensor& x_3d, const Denoiser& model,
                                const nn::ParamSet& params, const NoiseSchedule& sched, int truncation,
                                std::uint64_t seed);

/// Writes one CSV per level: <prefix>_level<i>.csv.
std::vector<std::filesystem::path> write_gamma_logs(const std::filesystem::path& prefix,
                                                    const std::vector<std::vector<GammaLogRow>>& logs);

}  // namespace facediff
