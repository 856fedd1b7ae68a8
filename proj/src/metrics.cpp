#include "facediff/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "facediff/degrade.hpp"
#include "facediff/errors.hpp"

namespace facediff {

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::vector<double> ssim_window() {
  std::vector<double> w(kSsimWindow);
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-0.5 * d * d / (kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable weighted sums over every fully-contained window.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& img, const std::vector<double>& w) {
  const Eigen::Index k = static_cast<Eigen::Index>(w.size());
  const Eigen::Index oh = img.rows() - k + 1, ow = img.cols() - k + 1;
  Eigen::MatrixXd tmp = Eigen::MatrixXd::Zero(img.rows(), ow);
  for (Eigen::Index y = 0; y < img.rows(); ++y) {
    for (Eigen::Index x = 0; x < ow; ++x) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) s += w[i] * img(y, x + i);
      tmp(y, x) = s;
    }
  }
  Eigen::MatrixXd out(oh, ow);
  for (Eigen::Index y = 0; y < oh; ++y) {
    for (Eigen::Index x = 0; x < ow; ++x) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) s += w[i] * tmp(y + i, x);
      out(y, x) = s;
    }
  }
  return out;
}

Eigen::MatrixXd luma_matrix(const Tensor& img) {
  const Tensor g = to_gray(img);
  Eigen::MatrixXd m(g.height, g.width);
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) m(y, x) = g.at(y, x, 0);
  }
  return m;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (a.empty()) throw InvalidArgument("psnr: empty images");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse < 1e-10) return kPsnrCap;
  return 10.0 * std::log10(peak * peak / mse);
}

Tensor to_gray(const Tensor& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw ShapeError("to_gray: expected 1 or 3 channels, got " + img.shape_string());
  Tensor g(img.height, img.width, 1);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    g.data[p] = 0.299 * img.data[3 * p] + 0.587 * img.data[3 * p + 1] + 0.114 * img.data[3 * p + 2];
  }
  return g;
}

double psnr_gray(const Tensor& a, const Tensor& b, double peak) {
  require_same_shape(a, b, "psnr_gray");
  return psnr(to_gray(a), to_gray(b), peak);
}

double ssim(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "ssim");
  if (a.height < kSsimWindow || a.width < kSsimWindow) {
    throw InvalidArgument("ssim: image " + a.shape_string() + " is smaller than the 11x11 window");
  }
  static const std::vector<double> w = ssim_window();
  const Eigen::MatrixXd x = luma_matrix(a), y = luma_matrix(b);
  const Eigen::MatrixXd mx = filter_valid(x, w), my = filter_valid(y, w);
  const Eigen::MatrixXd exx = filter_valid(x.cwiseProduct(x), w);
  const Eigen::MatrixXd eyy = filter_valid(y.cwiseProduct(y), w);
  const Eigen::MatrixXd exy = filter_valid(x.cwiseProduct(y), w);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (Eigen::Index i = 0; i < mx.size(); ++i) {
    const double ux = mx(i), uy = my(i);
    const double vx = exx(i) - ux * ux, vy = eyy(i) - uy * uy, cxy = exy(i) - ux * uy;
    total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

double frechet_distance(const FeatureStats& s1, const FeatureStats& s2) {
  const Eigen::Index d = s1.mu.size();
  if (s2.mu.size() != d || s1.sigma.rows() != d || s1.sigma.cols() != d || s2.sigma.rows() != d ||
      s2.sigma.cols() != d) {
    throw ShapeError("frechet_distance: feature dimensions differ");
  }
  const Eigen::MatrixXd root1 = psd_sqrt(s1.sigma);
  const Eigen::MatrixXd m = root1 * s2.sigma * root1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const double tr_root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double dist = (s1.mu - s2.mu).squaredNorm() + s1.sigma.trace() + s2.sigma.trace() - 2.0 * tr_root;
  return std::max(0.0, dist);
}

Eigen::VectorXd extract_features(const Tensor& img, FeatureExtractor extractor) {
  switch (extractor) {
    case FeatureExtractor::kPixels16: {
      const Tensor small = bicubic_resize(to_gray(img), 16, 16);
      return Eigen::Map<const Eigen::VectorXd>(small.data.data(), static_cast<Eigen::Index>(small.size()));
    }
  }
  throw InvalidArgument("unknown feature extractor");
}

FeatureStats stats_from_features(std::span<const Eigen::VectorXd> features) {
  if (features.size() < 2) throw InvalidArgument("feature statistics need at least 2 samples");
  const Eigen::Index d = features.front().size();
  FeatureStats s;
  s.n = static_cast<int>(features.size());
  s.mu = Eigen::VectorXd::Zero(d);
  for (const auto& f : features) {
    if (f.size() != d) throw ShapeError("feature vectors differ in length");
    s.mu += f;
  }
  s.mu /= s.n;
  s.sigma = Eigen::MatrixXd::Zero(d, d);
  for (const auto& f : features) {
    const Eigen::VectorXd c = f - s.mu;
    s.sigma.selfadjointView<Eigen::Lower>().rankUpdate(c);
  }
  s.sigma = s.sigma.selfadjointView<Eigen::Lower>();
  s.sigma /= (s.n - 1);
  return s;
}

FeatureStats feature_stats(std::span<const Tensor> images, FeatureExtractor extractor) {
  if (images.size() < 2) throw InvalidArgument("feature statistics need at least 2 images");
  std::vector<Eigen::VectorXd> feats;
  feats.reserve(images.size());
  for (const auto& img : images) feats.push_back(extract_features(img, extractor));
  return stats_from_features(feats);
}

}  // namespace facediff
