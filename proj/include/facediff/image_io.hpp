#pragma once

#include <filesystem>
#include <vector>

#include "facediff/tensor.hpp"

namespace facediff {

/// Reads an 8-bit PNG (gray, RGB or RGBA) as an H x W x 3 image in [0, 1].
/// Alpha is dropped and gray is replicated over the three channels.
Tensor read_png(const std::filesystem::path& path);

/// Writes an RGB image in [0, 1] as 8-bit PNG, quantizing with round(v * 255)
/// after clamping. Grayscale (1-channel) tensors are written as gray PNGs.
void write_png(const std::filesystem::path& path, const Tensor& image);

/// Rounds an image to the 8-bit grid, exactly as write_png would store it.
Tensor quantize8(const Tensor& image);

/// [0, 1] image -> [-1, 1] model space and back. from_model_space clamps.
Tensor to_model_space(const Tensor& image);
Tensor from_model_space(const Tensor& latent);

/// Sorted list of *.png files directly inside dir.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

}  // namespace facediff
