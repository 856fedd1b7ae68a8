#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "facediff/errors.hpp"
#include "facediff/metrics.hpp"
#include "facediff/rng.hpp"
#include "support/test_images.hpp"

using namespace facediff;

TEST_CASE("psnr") {
  const Tensor a = facediff::testing::natural_image(32, 1);
  CHECK(psnr(a, a) == kPsnrCap);
  Tensor b = a;
  for (double& v : b.data) v += 0.1;
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(b, a) == psnr(a, b));
  const Tensor c = facediff::testing::natural_image(32, 2);
  CHECK(psnr(a, c) == psnr(c, a));
  CHECK(psnr_gray(a, b) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK_THROWS_AS(psnr(a, Tensor(32, 31, 3)), ShapeError);
}

TEST_CASE("ssim") {
  const Tensor a = facediff::testing::natural_image(32, 3);
  const Tensor b = facediff::testing::natural_image(32, 4);
  SUBCASE("identity is exactly one") {
    CHECK(ssim(a, a) == 1.0);
    CHECK(ssim(b, b) == 1.0);
  }
  SUBCASE("symmetric") { CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12); }
  SUBCASE("constants reduce to the luminance term") {
    const double ma = 0.3, mb = 0.55;
    const double c1 = 0.01 * 0.01;
    const double expect = (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    CHECK(std::abs(ssim(Tensor(16, 16, 1, ma), Tensor(16, 16, 1, mb)) - expect) <= 1e-12);
  }
  SUBCASE("distortion lowers the score") {
    Rng rng(3);
    Tensor noisy = a;
    for (double& v : noisy.data) v = std::clamp(v + 0.1 * rng.normal(), 0.0, 1.0);
    const double s = ssim(a, noisy);
    CHECK(s < 0.95);
    CHECK(s > -1.0);
  }
  SUBCASE("window size precondition") { CHECK_THROWS_AS(ssim(Tensor(10, 32, 3), Tensor(10, 32, 3)), InvalidArgument); }
}

TEST_CASE("frechet_distance") {
  Rng rng(5);
  const int d = 6;
  auto random_stats = [&rng, d] {
    FeatureStats s;
    s.mu = Eigen::VectorXd(d);
    for (int i = 0; i < d; ++i) s.mu(i) = rng.normal();
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d * d; ++i) a.data()[i] = rng.normal();
    s.sigma = a * a.transpose();
    s.n = 10;
    return s;
  };
  const FeatureStats s1 = random_stats(), s2 = random_stats();

  SUBCASE("identical stats") { CHECK(frechet_distance(s1, s1) <= 1e-8); }
  SUBCASE("identity covariances reduce to the mean distance") {
    FeatureStats a = s1, b = s2;
    a.sigma = b.sigma = Eigen::MatrixXd::Identity(d, d);
    CHECK(std::abs(frechet_distance(a, b) - (a.mu - b.mu).squaredNorm()) <= 1e-10);
  }
  SUBCASE("diagonal closed form") {
    FeatureStats a = s1, b = s2;
    Eigen::VectorXd v1(d), v2(d);
    for (int i = 0; i < d; ++i) v1(i) = 0.1 + rng.uniform() * 3, v2(i) = 0.1 + rng.uniform() * 3;
    a.sigma = v1.asDiagonal();
    b.sigma = v2.asDiagonal();
    double expect = (a.mu - b.mu).squaredNorm();
    for (int i = 0; i < d; ++i) expect += std::pow(std::sqrt(v1(i)) - std::sqrt(v2(i)), 2);
    CHECK(std::abs(frechet_distance(a, b) - expect) <= 1e-8);
  }
  SUBCASE("symmetric and non-negative") {
    const double ab = frechet_distance(s1, s2), ba = frechet_distance(s2, s1);
    CHECK(std::abs(ab - ba) <= 1e-8);
    CHECK(ab >= 0.0);
  }
  SUBCASE("dimension mismatch") {
    FeatureStats small = s1;
    small.mu.conservativeResize(d - 1);
    CHECK_THROWS_AS(frechet_distance(small, s2), ShapeError);
  }
}

TEST_CASE("feature_stats") {
  std::vector<Tensor> set;
  for (int i = 0; i < 6; ++i) set.push_back(facediff::testing::natural_image(32, 20 + i));

  SUBCASE("pixels16 is a 256-dim luma thumbnail") {
    const auto f = extract_features(set[0], FeatureExtractor::kPixels16);
    CHECK(f.size() == 256);
  }
  SUBCASE("duplicated set is rank deficient and at distance 0 from itself") {
    std::vector<Tensor> dup{set[0], set[0], set[1], set[1]};
    const auto s = feature_stats(dup, FeatureExtractor::kPixels16);
    CHECK(s.n == 4);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.sigma);
    const auto& ev = es.eigenvalues();
    CHECK(ev.minCoeff() >= -1e-8);
    CHECK(std::count_if(ev.data(), ev.data() + ev.size(), [](double v) { return v > 1e-10; }) == 1);
    CHECK(frechet_distance(s, s) <= 1e-8);
  }
  SUBCASE("ordering does not matter") {
    auto rev = set;
    std::reverse(rev.begin(), rev.end());
    const auto a = feature_stats(set, FeatureExtractor::kPixels16);
    const auto b = feature_stats(rev, FeatureExtractor::kPixels16);
    CHECK((a.mu - b.mu).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((a.sigma - b.sigma).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((a.sigma - a.sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two halves of one distribution are closer than a shifted distribution") {
    Rng rng(8);
    auto sample = [&rng](double shift) {
      Tensor t(16, 16, 1);
      for (double& v : t.data) v = 0.5 + shift + 0.05 * rng.normal();
      return t;
    };
    std::vector<Tensor> h1, h2, shifted;
    for (int i = 0; i < 40; ++i) h1.push_back(sample(0.0)), h2.push_back(sample(0.0)), shifted.push_back(sample(0.1));
    const auto s1 = feature_stats(h1, FeatureExtractor::kPixels16);
    const auto s2 = feature_stats(h2, FeatureExtractor::kPixels16);
    const auto s3 = feature_stats(shifted, FeatureExtractor::kPixels16);
    CHECK(frechet_distance(s1, s2) < frechet_distance(s1, s3));
  }
  SUBCASE("needs two images") { CHECK_THROWS_AS(feature_stats(std::span(set).first(1), FeatureExtractor::kPixels16), InvalidArgument); }
}
