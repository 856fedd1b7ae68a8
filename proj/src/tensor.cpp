#include "facediff/tensor.hpp"

#include <cmath>
#include <sstream>

#include "facediff/errors.hpp"

namespace facediff {

Tensor::Tensor(int h, int w, int c, double fill) : height(h), width(w), channels(c) {
  if (h < 0 || w < 0 || c < 0) throw ShapeError("negative tensor dimension");
  data.assign(static_cast<std::size_t>(h) * w * c, fill);
}

Tensor Tensor::vector(std::span<const double> values) {
  Tensor t(1, 1, static_cast<int>(values.size()));
  std::copy(values.begin(), values.end(), t.data.begin());
  return t;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '(' << height << ',' << width << ',' << channels << ')';
  return os.str();
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

}  // namespace facediff
