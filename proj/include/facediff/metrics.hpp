#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "facediff/tensor.hpp"

namespace facediff {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(peak^2 / MSE) over all entries; kPsnrCap when MSE < 1e-10.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// ITU-R BT.601 luma. One-channel inputs are returned unchanged.
Tensor to_gray(const Tensor& img);

/// PSNR after grayscale conversion.
double psnr_gray(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Single-scale SSIM on the luma channel: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1, averaged over valid windows.
double ssim(const Tensor& a, const Tensor& b);

struct FeatureStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  int n = 0;
};

/// |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2)), clamped at 0. The matrix
/// root is taken through symmetric eigendecompositions with negative
/// eigenvalues clamped to 0.
double frechet_distance(const FeatureStats& s1, const FeatureStats& s2);

enum class FeatureExtractor { kPixels16 };

/// pixels16: bicubic resize to 16x16 luma, flattened to 256 values.
Eigen::VectorXd extract_features(const Tensor& img, FeatureExtractor extractor);

/// Mean and unbiased covariance (two-pass). Needs at least two samples.
FeatureStats stats_from_features(std::span<const Eigen::VectorXd> features);
FeatureStats feature_stats(std::span<const Tensor> images, FeatureExtractor extractor);

}  // namespace facediff
