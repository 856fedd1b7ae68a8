#include "facediff/schedule.hpp"

#include <cmath>
#include <string>

#include "facediff/errors.hpp"

namespace facediff {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw InvalidArgument("schedule needs at least one step");
  alphas_.reserve(betas_.size());
  alpha_bars_.reserve(betas_.size());
  double running = 1.0;
  for (double b : betas_) {
    if (!(b > 0.0 && b < 1.0)) throw InvalidArgument("beta outside (0, 1)");
    alphas_.push_back(1.0 - b);
    running *= 1.0 - b;
    alpha_bars_.push_back(running);
  }
  if (!(alpha_bars_.back() > 0.0)) throw NumericError("alpha_bar underflowed to zero");
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > steps()) {
    throw InvalidArgument("timestep " + std::to_string(t) + " outside [1, " +
                          std::to_string(steps()) + "]");
  }
}

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end, ScheduleKind kind) {
  if (steps < 1) throw InvalidArgument("schedule step count must be positive");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw InvalidArgument("require 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  switch (kind) {
    case ScheduleKind::kLinear:
      if (steps == 1) {
        betas[0] = beta_start;
      } else {
        for (int i = 0; i < steps; ++i) {
          const double f = static_cast<double>(i) / (steps - 1);
          betas[i] = beta_start + f * (beta_end - beta_start);
        }
        betas.back() = beta_end;
      }
      break;
  }
  return NoiseSchedule(std::move(betas));
}

namespace {

LatentImage affine_combine(const LatentImage& a, double wa, const LatentImage& b, double wb) {
  LatentImage out(a.height, a.width, a.channels);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = wa * a.data[i] + wb * b.data[i];
  return out;
}

}  // namespace

LatentImage forward_step(const LatentImage& x_prev, int t, const LatentImage& z,
                         const NoiseSchedule& sched) {
  sched.check_step(t);
  require_same_shape(x_prev, z, "forward_step");
  const double b = sched.beta(t);
  return affine_combine(x_prev, std::sqrt(1.0 - b), z, std::sqrt(b));
}

LatentImage q_sample(const LatentImage& x0, int t, const LatentImage& eps,
                     const NoiseSchedule& sched) {
  sched.check_step(t);
  require_same_shape(x0, eps, "q_sample");
  const double ab = sched.alpha_bar(t);
  return affine_combine(x0, std::sqrt(ab), eps, std::sqrt(1.0 - ab));
}

LatentImage reverse_step(const LatentImage& x_t, const LatentImage& eps_hat, int t,
                         const LatentImage& z, SigmaMode sigma_mode, const NoiseSchedule& sched) {
  sched.check_step(t);
  require_same_shape(x_t, eps_hat, "reverse_step");
  const double ab = sched.alpha_bar(t);
  if (!(1.0 - ab > 0.0)) throw NumericError("reverse_step: alpha_bar_t == 1");
  const double a = sched.alpha(t);
  const double inv_sqrt_a = 1.0 / std::sqrt(a);
  const double eps_coef = (1.0 - a) / std::sqrt(1.0 - ab);
  const double sigma = sigma_mode == SigmaMode::kBeta ? std::sqrt(sched.beta(t)) : 0.0;
  if (sigma != 0.0) require_same_shape(x_t, z, "reverse_step noise");

  LatentImage out(x_t.height, x_t.width, x_t.channels);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = inv_sqrt_a * (x_t.data[i] - eps_coef * eps_hat.data[i]);
    if (sigma != 0.0) v += sigma * z.data[i];
    out.data[i] = v;
  }
  return out;
}

}  // namespace facediff
