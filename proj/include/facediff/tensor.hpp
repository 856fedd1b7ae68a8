#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace facediff {

/// Dense H x W x C array of doubles, channel-fastest (HWC) layout.
///
/// Used for images, latents, feature maps and (as 1 x 1 x C) vectors.
struct Tensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int h, int w, int c, double fill = 0.0);

  static Tensor vector(std::span<const double> values);

  std::size_t size() const { return data.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return data.empty(); }

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Tensor& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
  std::string shape_string() const;

  bool all_finite() const;
};

/// Throws ShapeError unless a and b have identical shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace facediff
