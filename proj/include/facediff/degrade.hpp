#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "facediff/tensor.hpp"

namespace facediff {

/// Parameters of the blur -> downsample -> noise -> JPEG degradation.
struct DegradationParams {
  double sigma_blur = 1.0;  ///< Gaussian blur std in pixels
  double r_down = 4.0;      ///< downsampling factor
  double delta_noise = 1.0; ///< noise std on the 0-255 scale
  int q_jpeg = 70;          ///< JPEG quality, 1..100
};

struct DegradationRanges {
  double sigma_lo = 0.1, sigma_hi = 10.0;
  double r_lo = 4.0, r_hi = 20.0;
  double delta_lo = 1.0, delta_hi = 20.0;
  int q_lo = 30, q_hi = 70;

  bool operator==(const DegradationRanges&) const = default;
};

/// sigma, r, delta uniform over their ranges, q uniform over integers.
DegradationParams sample_degradation(std::uint64_t seed, const DegradationRanges& ranges = {});

/// Normalized 1-D Gaussian of length 2 * ceil(3 sigma) + 1.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with reflect (mirror, edge not repeated) padding.
Tensor gaussian_blur(const Tensor& img, double sigma);

/// Bicubic resampling (a = -0.5) with edge replication. When shrinking, the
/// kernel is widened by the scale factor to avoid aliasing.
Tensor bicubic_resize(const Tensor& img, int out_h, int out_w);

/// Output size after downsampling by r: round(size / r).
int downsampled_size(int size, double r);

/// Quantization-table scale for quality q: 5000 / q below 50, else 200 - 2q.
int jpeg_quality_scale(int q);
/// Base table scaled for quality q, entries clamped to [1, 255].
std::array<int, 64> jpeg_table(bool chroma, int q);
/// Version tag of the compiled-in base tables.
const char* jpeg_tables_version();

/// DCT quantization round trip in YCbCr (no chroma subsampling, no entropy
/// coding). Input and output are [0, 1] RGB.
Tensor jpeg_approx(const Tensor& img, int q);

/// Blur, downsample by r, add noise, JPEG, then upsample back to the input size.
Tensor degrade_pipeline(const Tensor& y, const DegradationParams& p, std::uint64_t noise_seed);

struct ManifestRow {
  std::string filename;
  DegradationParams params;
  std::uint64_t noise_seed = 0;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace facediff
