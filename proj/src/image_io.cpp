#include "facediff/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "facediff/errors.hpp"

namespace facediff {

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Tensor read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IoError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  Tensor out(static_cast<int>(img.height), static_cast<int>(img.width), 3);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = buf[i] / 255.0;
  return out;
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (image.channels != 3 && image.channels != 1) {
    throw ShapeError("write_png: expected 1 or 3 channels, got " + image.shape_string());
  }
  if (!image.all_finite()) throw NumericError("write_png: image has non-finite values");
  std::vector<std::uint8_t> buf(image.size());
  std::transform(image.data.begin(), image.data.end(), buf.begin(), to_byte);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

Tensor quantize8(const Tensor& image) {
  Tensor out = image;
  for (double& v : out.data) v = to_byte(v) / 255.0;
  return out;
}

Tensor to_model_space(const Tensor& image) {
  Tensor out = image;
  for (double& v : out.data) v = 2.0 * v - 1.0;
  return out;
}

Tensor from_model_space(const Tensor& latent) {
  Tensor out = latent;
  for (double& v : out.data) v = std::clamp(0.5 * (v + 1.0), 0.0, 1.0);
  return out;
}

std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace facediff
