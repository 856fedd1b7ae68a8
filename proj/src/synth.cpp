#include "facediff/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "facediff/degrade.hpp"
#include "facediff/rng.hpp"

namespace facediff {

Tensor synth_face_image(const FacePriorModel& model, const Coeff3DMM& c, int size, std::uint64_t seed) {
  const auto render = render_mesh(model, c, size, size);
  Tensor img = render.image;
  Rng rng(seed * 7 + 1);
  const double fx = rng.uniform(1.0, 3.0), fy = rng.uniform(1.0, 3.0), ph = rng.uniform(0.0, 6.0);
  const Tensor grain = gaussian_blur(rng.normal_tensor(size, size, 1), 0.8);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = static_cast<double>(x) / size, v = static_cast<double>(y) / size;
      for (int k = 0; k < 3; ++k) {
        double val = img.at(y, x, k);
        if (!render.covered(y, x)) {
          val = 0.35 + 0.2 * std::sin(2 * std::numbers::pi * (fx * u + 0.3 * k) + ph) *
                           std::cos(2 * std::numbers::pi * fy * v);
        }
        img.at(y, x, k) = std::clamp(val + 0.04 * grain.at(y, x, 0), 0.0, 1.0);
      }
    }
  }
  return img;
}

}  // namespace facediff
