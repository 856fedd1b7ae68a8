#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "facediff/tensor.hpp"

namespace facediff {

inline constexpr int kIdDims = 80;
inline constexpr int kExpDims = 64;
inline constexpr int kTexDims = 80;
inline constexpr int kLightDims = 27;
inline constexpr int kPoseDims = 6;
inline constexpr int kCoeffDims = kIdDims + kExpDims + kTexDims + kLightDims + kPoseDims;
inline constexpr int kShBands = 9;

/// Rows are vertices, columns x/y/z (or r/g/b for colors).
using VertexMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Triangle = std::array<std::uint32_t, 3>;

/// 257 morphable-model coefficients, partitioned 80/64/80/27/6.
///
/// pose holds rotation angles (rx, ry, rz) in radians followed by a
/// translation (tx, ty, tz) in mesh units.
struct Coeff3DMM {
  std::vector<double> alpha_id = std::vector<double>(kIdDims, 0.0);
  std::vector<double> beta_exp = std::vector<double>(kExpDims, 0.0);
  std::vector<double> delta_tex = std::vector<double>(kTexDims, 0.0);
  std::vector<double> gamma_light = std::vector<double>(kLightDims, 0.0);
  std::vector<double> pose = std::vector<double>(kPoseDims, 0.0);
};

Coeff3DMM split_coeffs(std::span<const double> v);
std::vector<double> concat_coeffs(const Coeff3DMM& c);

/// Linear face model. Basis rows are vertex-major: row 3*i + axis.
struct FacePriorModel {
  VertexMatrix mean_shape;
  VertexMatrix mean_texture;
  Eigen::MatrixXd basis_id;
  Eigen::MatrixXd basis_exp;
  Eigen::MatrixXd basis_tex;
  std::vector<Triangle> triangles;

  int vertex_count() const { return static_cast<int>(mean_shape.rows()); }
  /// Throws ShapeError if the arrays disagree with each other.
  void validate() const;
};

/// Smallest vertex count for which 80 orthonormal columns fit in 3V rows.
inline constexpr int kMinPriorVertices = (kIdDims + 2) / 3;

/// Deterministic ellipsoidal head patch with V vertices and seeded
/// orthonormal bases built from smooth random displacement fields.
FacePriorModel synth_prior_model(std::uint64_t seed, int vertices);

VertexMatrix shape_from_coeffs(const FacePriorModel& model, const Coeff3DMM& c);
/// Raw texture; clamping to [0, 1] happens at render time.
VertexMatrix texture_from_coeffs(const FacePriorModel& model, const Coeff3DMM& c);

/// Real spherical-harmonics basis through band 2 evaluated at a unit normal.
std::array<double, kShBands> sh_basis(const Eigen::Vector3d& n);

/// C[i, k] = texture[i, k] * sum_b gamma[k * 9 + b] * Phi_b(normal_i).
VertexMatrix sh_shade(const VertexMatrix& texture, const VertexMatrix& normals,
                      std::span<const double> gamma);

/// Area-weighted vertex normals. Unreferenced vertices get +z.
VertexMatrix vertex_normals(const VertexMatrix& positions, std::span<const Triangle> triangles);

/// R = Rz(rz) * Ry(ry) * Rx(rx).
Eigen::Matrix3d euler_rotation(double rx, double ry, double rz);

inline constexpr double kBackground = 0.5;

struct RenderedPrior {
  Tensor image;                     ///< H x W x 3 in [0, 1]
  std::vector<std::uint8_t> mask;   ///< 1 where a triangle covers the pixel
  Tensor depth;                     ///< H x W x 1, +inf where uncovered

  bool covered(int y, int x) const { return mask[static_cast<std::size_t>(y) * image.width + x] != 0; }
  std::size_t coverage() const;
};

/// Orthographic z-buffer rasterizer. positions are in view space: the image
/// spans x, y in [-1, 1] with +y up, and the camera looks down -z, so depth
/// is -z. Overlaps resolve to the strictly nearer fragment; equal depths keep
/// the lower triangle index. Colors are interpolated barycentrically and
/// clamped to [0, 1].
RenderedPrior rasterize(const VertexMatrix& positions, const VertexMatrix& colors,
                        std::span<const Triangle> triangles, int height, int width);

/// Pose, shade and rasterize a face from its coefficients.
RenderedPrior render_mesh(const FacePriorModel& model, const Coeff3DMM& c, int height, int width);

/// Plausible coefficients for synthetic data: small identity/expression/
/// texture offsets, mostly ambient light and a mild head rotation.
Coeff3DMM random_coeffs(std::uint64_t seed, const FacePriorModel& model);

inline constexpr std::uint32_t kPriorModelVersion = 1;

void write_prior_model(const std::filesystem::path& path, const FacePriorModel& model);
FacePriorModel read_prior_model(const std::filesystem::path& path);

/// Coefficient file: one line per image, "stem c0 c1 ... c256". Blank lines
/// and lines starting with '#' are ignored.
using CoeffTable = std::map<std::string, std::vector<double>>;
CoeffTable read_coeff_file(const std::filesystem::path& path);
void write_coeff_file(const std::filesystem::path& path, const CoeffTable& table);

}  // namespace facediff
