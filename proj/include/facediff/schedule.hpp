#pragma once

#include <vector>

#include "facediff/tensor.hpp"

namespace facediff {

/// Image or latent in model space ([-1, 1] per channel for images).
using LatentImage = Tensor;

enum class ScheduleKind { kLinear };

/// Fixed variance schedule of a diffusion process.
///
/// Steps are 1-based: betas()[t - 1] is beta_t. alpha_bar(0) is 1 by
/// convention. All arithmetic is done in double precision.
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> betas);

  int steps() const { return static_cast<int>(betas_.size()); }
  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  double beta(int t) const { return betas_.at(t - 1); }
  double alpha(int t) const { return alphas_.at(t - 1); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars_.at(t - 1); }

  /// Throws InvalidArgument unless 1 <= t <= steps().
  void check_step(int t) const;

 private:
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end,
                            ScheduleKind kind = ScheduleKind::kLinear);

/// One forward-process increment: sqrt(1 - beta_t) x_prev + sqrt(beta_t) z.
LatentImage forward_step(const LatentImage& x_prev, int t, const LatentImage& z,
                         const NoiseSchedule& sched);

/// Closed-form marginal: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
LatentImage q_sample(const LatentImage& x0, int t, const LatentImage& eps,
                     const NoiseSchedule& sched);

enum class SigmaMode { kBeta, kZero };

/// One ancestral reverse step given the predicted noise eps_hat.
///
///   x_{t-1} = (x_t - (1 - alpha_t) / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t) + sigma_t z
///
/// with sigma_t = sqrt(beta_t) for SigmaMode::kBeta and 0 for kZero.
LatentImage reverse_step(const LatentImage& x_t, const LatentImage& eps_hat, int t,
                         const LatentImage& z, SigmaMode sigma_mode, const NoiseSchedule& sched);

}  // namespace facediff
