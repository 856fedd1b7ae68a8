#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "doctest.h"
#include "facediff/errors.hpp"
#include "facediff/morphable3d.hpp"
#include "facediff/rng.hpp"

using namespace facediff;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

const FacePriorModel& small_model() {
  static const FacePriorModel m = synth_prior_model(11, 200);
  return m;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("facediff_m3d_" + name);
}

Coeff3DMM ambient_only() {
  Coeff3DMM c;
  const double phi0 = sh_basis(Eigen::Vector3d::UnitZ())[0];
  for (int k = 0; k < 3; ++k) c.gamma_light[static_cast<std::size_t>(k) * kShBands] = 1.0 / phi0;
  return c;
}

}  // namespace

TEST_CASE("split_coeffs partition") {
  SUBCASE("zero vector") {
    const auto c = split_coeffs(std::vector<double>(257, 0.0));
    for (const auto* f : {&c.alpha_id, &c.beta_exp, &c.delta_tex, &c.gamma_light, &c.pose}) {
      for (double v : *f) CHECK(v == 0.0);
    }
    CHECK(c.alpha_id.size() == 80);
    CHECK(c.beta_exp.size() == 64);
    CHECK(c.delta_tex.size() == 80);
    CHECK(c.gamma_light.size() == 27);
    CHECK(c.pose.size() == 6);
  }
  SUBCASE("gamma occupies entries 224..250") {
    std::vector<double> v(257);
    for (int i = 0; i < 257; ++i) v[i] = i;
    const auto c = split_coeffs(v);
    CHECK(c.gamma_light.front() == 224);
    CHECK(c.gamma_light.back() == 250);
    CHECK(c.pose.front() == 251);
    CHECK(c.delta_tex.front() == 144);
  }
  SUBCASE("round trip") {
    const auto v = random_values(257, 3);
    CHECK(concat_coeffs(split_coeffs(v)) == v);
  }
  SUBCASE("wrong length") {
    CHECK_THROWS_AS(split_coeffs(std::vector<double>(256)), InvalidArgument);
    CHECK_THROWS_AS(split_coeffs(std::vector<double>(258)), InvalidArgument);
  }
}

TEST_CASE("synth_prior_model") {
  const auto& m = small_model();
  SUBCASE("deterministic") {
    const auto again = synth_prior_model(11, 200);
    CHECK(again.mean_shape == m.mean_shape);
    CHECK(again.mean_texture == m.mean_texture);
    CHECK(again.basis_id == m.basis_id);
    CHECK(again.basis_exp == m.basis_exp);
    CHECK(again.basis_tex == m.basis_tex);
    CHECK(again.triangles == m.triangles);
    CHECK(synth_prior_model(12, 200).basis_id != m.basis_id);
  }
  SUBCASE("bases are column-orthonormal") {
    for (const auto* b : {&m.basis_id, &m.basis_exp, &m.basis_tex}) {
      const Eigen::MatrixXd gram = b->transpose() * *b;
      const double err = (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
      CHECK(err <= 1e-10);
    }
  }
  SUBCASE("topology") {
    CHECK(m.vertex_count() == 200);
    CHECK_NOTHROW(m.validate());
    std::set<std::uint32_t> used;
    for (const auto& t : m.triangles) used.insert(t.begin(), t.end());
    CHECK(used.size() == 200);
    CHECK(m.mean_texture.minCoeff() >= 0.0);
    CHECK(m.mean_texture.maxCoeff() <= 1.0);
  }
  SUBCASE("minimum size") {
    CHECK_NOTHROW(synth_prior_model(1, kMinPriorVertices));
    CHECK_THROWS_AS(synth_prior_model(1, kMinPriorVertices - 1), InvalidArgument);
    CHECK_THROWS_AS(synth_prior_model(1, 16), InvalidArgument);
  }
}

TEST_CASE("shape and texture synthesis") {
  const auto& m = small_model();
  Coeff3DMM zero;
  SUBCASE("zero coefficients give the means exactly") {
    CHECK(shape_from_coeffs(m, zero) == m.mean_shape);
    CHECK(texture_from_coeffs(m, zero) == m.mean_texture);
  }
  SUBCASE("linearity") {
    Coeff3DMM c;
    c.alpha_id = random_values(80, 5);
    c.delta_tex = random_values(80, 6);
    Coeff3DMM c2 = c;
    for (auto& v : c2.alpha_id) v *= 2.0;
    for (auto& v : c2.delta_tex) v *= 2.0;
    const VertexMatrix d1 = shape_from_coeffs(m, c) - m.mean_shape;
    const VertexMatrix d2 = shape_from_coeffs(m, c2) - m.mean_shape;
    CHECK((d2 - 2.0 * d1).cwiseAbs().maxCoeff() <= 1e-12);
    const VertexMatrix t1 = texture_from_coeffs(m, c) - m.mean_texture;
    const VertexMatrix t2 = texture_from_coeffs(m, c2) - m.mean_texture;
    CHECK((t2 - 2.0 * t1).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("superposition of identity and expression") {
    Coeff3DMM a, b, ab;
    a.alpha_id = random_values(80, 7);
    b.beta_exp = random_values(64, 8);
    ab.alpha_id = a.alpha_id;
    ab.beta_exp = b.beta_exp;
    const VertexMatrix lhs = shape_from_coeffs(m, ab) - m.mean_shape;
    const VertexMatrix rhs = (shape_from_coeffs(m, a) - m.mean_shape) + (shape_from_coeffs(m, b) - m.mean_shape);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("orthonormal isometry") {
    Coeff3DMM c;
    c.alpha_id = random_values(80, 9);
    c.delta_tex = random_values(80, 10);
    const double alpha_norm = Eigen::Map<const Eigen::VectorXd>(c.alpha_id.data(), 80).norm();
    const double delta_norm = Eigen::Map<const Eigen::VectorXd>(c.delta_tex.data(), 80).norm();
    CHECK(std::abs((shape_from_coeffs(m, c) - m.mean_shape).norm() - alpha_norm) <= 1e-8);
    CHECK(std::abs((texture_from_coeffs(m, c) - m.mean_texture).norm() - delta_norm) <= 1e-8);
  }
  SUBCASE("dimension mismatch") {
    Coeff3DMM bad;
    bad.alpha_id.resize(79);
    CHECK_THROWS_AS(shape_from_coeffs(m, bad), ShapeError);
    bad = Coeff3DMM{};
    bad.delta_tex.resize(81);
    CHECK_THROWS_AS(texture_from_coeffs(m, bad), ShapeError);
  }
}

TEST_CASE("sh_shade") {
  Rng rng(17);
  const int n = 64;
  VertexMatrix tex(n, 3), normals(n, 3);
  for (int i = 0; i < n; ++i) {
    tex.row(i) << rng.uniform(), rng.uniform(), rng.uniform();
    Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    normals.row(i) = v.normalized().transpose();
  }

  SUBCASE("band 0 scales texture by g * Phi0") {
    const double phi0 = 0.28209479;
    std::vector<double> gamma(27, 0.0);
    const double g[3] = {0.7, 1.3, -0.4};
    for (int k = 0; k < 3; ++k) gamma[k * 9] = g[k];
    const VertexMatrix c = sh_shade(tex, normals, gamma);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 3; ++k) CHECK(c(i, k) == doctest::Approx(tex(i, k) * g[k] * phi0).epsilon(1e-8));
    }
  }
  SUBCASE("zero light is black") {
    const VertexMatrix c = sh_shade(tex, normals, std::vector<double>(27, 0.0));
    CHECK(c.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("band 1 is rotation equivariant") {
    // Band-1 functions are (y, z, x) scaled by one constant, so the band-1
    // term is a dot product between the normal and a light vector.
    std::vector<double> gamma(27, 0.0);
    std::array<Eigen::Vector3d, 3> light;
    for (int k = 0; k < 3; ++k) {
      light[k] = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
      gamma[k * 9 + 1] = light[k].y();
      gamma[k * 9 + 2] = light[k].z();
      gamma[k * 9 + 3] = light[k].x();
    }
    const Eigen::Matrix3d r = euler_rotation(0.3, -1.1, 2.0);
    std::vector<double> rotated(27, 0.0);
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d rl = r * light[k];
      rotated[k * 9 + 1] = rl.y();
      rotated[k * 9 + 2] = rl.z();
      rotated[k * 9 + 3] = rl.x();
    }
    const VertexMatrix rn = normals * r.transpose();
    const VertexMatrix a = sh_shade(tex, normals, gamma);
    const VertexMatrix b = sh_shade(tex, rn, rotated);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("non-unit normals rejected") {
    VertexMatrix bad = normals;
    bad(3, 0) += 1e-3;
    CHECK_THROWS_AS(sh_shade(tex, bad, std::vector<double>(27, 1.0)), InvalidArgument);
    CHECK_THROWS_AS(sh_shade(tex, normals, std::vector<double>(26, 1.0)), ShapeError);
  }
}

TEST_CASE("euler_rotation composes Rz Ry Rx") {
  const double rx = 0.4, ry = -0.2, rz = 0.9;
  Eigen::Matrix3d mx, my, mz;
  mx << 1, 0, 0, 0, std::cos(rx), -std::sin(rx), 0, std::sin(rx), std::cos(rx);
  my << std::cos(ry), 0, std::sin(ry), 0, 1, 0, -std::sin(ry), 0, std::cos(ry);
  mz << std::cos(rz), -std::sin(rz), 0, std::sin(rz), std::cos(rz), 0, 0, 0, 1;
  CHECK((euler_rotation(rx, ry, rz) - mz * my * mx).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("rasterize: single triangle matches the barycentric oracle") {
  VertexMatrix pos(3, 3), col(3, 3);
  pos << -0.8, -0.6, 0.1, 0.7, -0.5, -0.3, 0.1, 0.9, 0.2;
  col << 0.9, 0.1, 0.2, 0.2, 0.8, 0.1, 0.1, 0.3, 0.7;
  const std::vector<Triangle> tri{{0, 1, 2}};
  const auto r = rasterize(pos, col, tri, 9, 9);

  // Pixel (4, 4) of a 9x9 image sits at the origin of the image plane.
  Eigen::Matrix3d a;
  a << pos(0, 0), pos(1, 0), pos(2, 0), pos(0, 1), pos(1, 1), pos(2, 1), 1, 1, 1;
  const Eigen::Vector3d w = a.colPivHouseholderQr().solve(Eigen::Vector3d(0, 0, 1));
  REQUIRE(r.covered(4, 4));
  for (int k = 0; k < 3; ++k) {
    const double expect = w(0) * col(0, k) + w(1) * col(1, k) + w(2) * col(2, k);
    CHECK(std::abs(r.image.at(4, 4, k) - expect) <= 1e-6);
  }
  const double expect_depth = -(w(0) * pos(0, 2) + w(1) * pos(1, 2) + w(2) * pos(2, 2));
  CHECK(std::abs(r.depth.at(4, 4, 0) - expect_depth) <= 1e-12);
  // Winding order does not matter.
  const auto flipped = rasterize(pos, col, std::vector<Triangle>{{0, 2, 1}}, 9, 9);
  CHECK(flipped.mask == r.mask);
  for (std::size_t i = 0; i < r.image.size(); ++i) CHECK(std::abs(flipped.image.data[i] - r.image.data[i]) <= 1e-12);
  // Corners lie outside the triangle and keep the background.
  CHECK_FALSE(r.covered(0, 0));
  CHECK(r.image.at(0, 0, 1) == kBackground);
  CHECK(std::isinf(r.depth.at(0, 0, 0)));
}

TEST_CASE("rasterize: z-buffer order") {
  VertexMatrix pos(6, 3), col(6, 3);
  // Two identical big triangles at different depths; colors differ.
  pos << -1, -1, 0.0, 1, -1, 0.0, 0, 1, 0.0, -1, -1, 0.5, 1, -1, 0.5, 0, 1, 0.5;
  col << 1, 0, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0;
  SUBCASE("nearer fragment wins regardless of order") {
    // z = 0.5 is nearer (depth -0.5).
    for (auto tris : {std::vector<Triangle>{{0, 1, 2}, {3, 4, 5}}, std::vector<Triangle>{{3, 4, 5}, {0, 1, 2}}}) {
      const auto r = rasterize(pos, col, tris, 8, 8);
      CHECK(r.image.at(4, 4, 1) == 1.0);
      CHECK(r.image.at(4, 4, 0) == 0.0);
    }
  }
  SUBCASE("ties keep the lower triangle index") {
    VertexMatrix flat = pos;
    flat.col(2).setZero();
    const auto r = rasterize(flat, col, std::vector<Triangle>{{3, 4, 5}, {0, 1, 2}}, 8, 8);
    CHECK(r.image.at(4, 4, 1) == 1.0);
  }
}

TEST_CASE("render_mesh") {
  const auto& m = small_model();
  SUBCASE("zero shape and texture coefficients render the mean face") {
    const Coeff3DMM c = ambient_only();
    const auto r = render_mesh(m, c, 32, 32);
    // Unit ambient light leaves the mean texture unchanged.
    const auto expect = rasterize(m.mean_shape, m.mean_texture, m.triangles, 32, 32);
    CHECK(r.mask == expect.mask);
    CHECK(r.depth.data == expect.depth.data);
    double err = 0.0;
    for (std::size_t i = 0; i < r.image.size(); ++i) err = std::max(err, std::abs(r.image.data[i] - expect.image.data[i]));
    CHECK(err <= 1e-12);
    CHECK(r.coverage() > 32 * 32 / 3);

    // All-zero coefficients: same silhouette, unlit (black) face.
    const auto dark = render_mesh(m, Coeff3DMM{}, 32, 32);
    CHECK(dark.mask == expect.mask);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        if (dark.covered(y, x)) CHECK(dark.image.at(y, x, 0) == 0.0);
      }
    }
  }
  SUBCASE("off-screen translation leaves only background") {
    Coeff3DMM c = ambient_only();
    c.pose[3] = 5.0;
    const auto r = render_mesh(m, c, 16, 16);
    CHECK(r.coverage() == 0);
    for (double v : r.image.data) CHECK(v == kBackground);
  }
  SUBCASE("deterministic and background outside the mask") {
    const auto c = random_coeffs(4, m);
    const auto a = render_mesh(m, c, 24, 24);
    const auto b = render_mesh(m, c, 24, 24);
    CHECK(a.image.data == b.image.data);
    CHECK(a.mask == b.mask);
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 24; ++x) {
        if (!a.covered(y, x)) {
          for (int k = 0; k < 3; ++k) CHECK(a.image.at(y, x, k) == kBackground);
        } else {
          CHECK(std::isfinite(a.depth.at(y, x, 0)));
        }
      }
    }
    CHECK(*std::min_element(a.image.data.begin(), a.image.data.end()) >= 0.0);
    CHECK(*std::max_element(a.image.data.begin(), a.image.data.end()) <= 1.0);
  }
  SUBCASE("size precondition") { CHECK_THROWS_AS(render_mesh(m, Coeff3DMM{}, 7, 16), InvalidArgument); }
}

TEST_CASE("vertex normals of the mean head point outwards") {
  const auto& m = small_model();
  const VertexMatrix n = vertex_normals(m.mean_shape, m.triangles);
  for (int i = 0; i < n.rows(); ++i) {
    CHECK(std::abs(n.row(i).norm() - 1.0) <= 1e-12);
    CHECK(n(i, 2) > 0.0);
  }
}

TEST_CASE("prior model file round trip") {
  const auto& m = small_model();
  const auto path = temp_path("model.bin");
  write_prior_model(path, m);
  const auto back = read_prior_model(path);
  CHECK(back.triangles == m.triangles);
  CHECK((back.basis_exp - m.basis_exp).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK((back.mean_shape - m.mean_shape).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(std::filesystem::file_size(path) ==
        16 + 5 * 4 + 4 * (200 * 3 * 2 + 600 * (80 + 64 + 80)) + 12 * m.triangles.size());

  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "not a model";
  }
  CHECK_THROWS_AS(read_prior_model(path), IoError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_prior_model(path), IoError);
}

TEST_CASE("coefficient file") {
  const auto path = temp_path("coeffs.txt");
  CoeffTable table;
  table["face_a"] = random_values(257, 1);
  table["face_b"] = random_values(257, 2);
  write_coeff_file(path, table);
  CHECK(read_coeff_file(path) == table);

  {
    std::ofstream os(path, std::ios::trunc);
    os << "# comment\n\nface_c";
    for (int i = 0; i < 256; ++i) os << " 0";
    os << "\n";
  }
  CHECK_THROWS_AS(read_coeff_file(path), IoError);
  {
    std::ofstream os(path, std::ios::trunc);
    os << "face_c";
    for (int i = 0; i < 257; ++i) os << (i == 5 ? " x" : " 1");
    os << "\n";
  }
  CHECK_THROWS_AS(read_coeff_file(path), IoError);
  std::filesystem::remove(path);
}
