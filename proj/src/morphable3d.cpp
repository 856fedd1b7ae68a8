#include "facediff/morphable3d.hpp"

#include <Eigen/Geometry>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "binary_io.hpp"
#include "facediff/errors.hpp"
#include "facediff/rng.hpp"

namespace facediff {

namespace {

constexpr char kPriorMagic[8] = {'F', 'D', 'P', 'R', 'I', 'O', 'R', '1'};

// Half-extents of the head ellipsoid and the angular span of the patch.
constexpr double kAxisX = 0.72;
constexpr double kAxisY = 0.92;
constexpr double kAxisZ = 0.62;
constexpr double kPatchSpan = 0.84 * std::numbers::pi;

void require_length(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(n) + " values, got " +
                     std::to_string(v.size()));
  }
}

Eigen::Map<const Eigen::VectorXd> as_vector(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

VertexMatrix reshape_vertices(const Eigen::VectorXd& flat) {
  VertexMatrix out(flat.size() / 3, 3);
  std::copy(flat.data(), flat.data() + flat.size(), out.data());
  return out;
}

Eigen::VectorXd flatten(const VertexMatrix& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

// Column-orthonormal basis spanning smooth random displacement fields over
// the rest positions. Each column mixes a few low-frequency cosines per axis.
Eigen::MatrixXd smooth_orthonormal_basis(const VertexMatrix& rest, int columns, Rng& rng) {
  const Eigen::Index rows = rest.rows() * 3;
  Eigen::MatrixXd raw(rows, columns);
  constexpr int kWaves = 4;
  for (int j = 0; j < columns; ++j) {
    for (int axis = 0; axis < 3; ++axis) {
      std::array<Eigen::Vector3d, kWaves> k;
      std::array<double, kWaves> phase{}, weight{};
      for (int m = 0; m < kWaves; ++m) {
        k[m] = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 1.5;
        phase[m] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        weight[m] = rng.normal();
      }
      for (Eigen::Index i = 0; i < rest.rows(); ++i) {
        const Eigen::Vector3d p = rest.row(i).transpose();
        double v = 0.0;
        for (int m = 0; m < kWaves; ++m) v += weight[m] * std::cos(k[m].dot(p) + phase[m]);
        raw(3 * i + axis, j) = v;
      }
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, columns);
  // Fix the sign ambiguity of QR so columns correlate positively with the raw fields.
  for (int j = 0; j < columns; ++j) {
    if (q.col(j).dot(raw.col(j)) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

// Raster-order grid with `cols` vertices per row; a trailing partial row is
// stitched to the row above so every vertex belongs to a triangle.
std::vector<Triangle> grid_triangles(int vertices, int cols) {
  std::vector<Triangle> tris;
  const int rows = (vertices + cols - 1) / cols;
  auto idx = [cols](int r, int c) { return static_cast<std::uint32_t>(r * cols + c); };
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const auto p00 = idx(r, c), p01 = idx(r, c + 1), p10 = idx(r + 1, c), p11 = idx(r + 1, c + 1);
      if (static_cast<int>(p10) >= vertices) continue;
      if (static_cast<int>(p11) < vertices) {
        tris.push_back({p00, p10, p01});
        tris.push_back({p01, p10, p11});
      } else {
        tris.push_back({p00, p10, p01});
      }
    }
  }
  return tris;
}

}  // namespace

Coeff3DMM split_coeffs(std::span<const double> v) {
  if (v.size() != static_cast<std::size_t>(kCoeffDims)) {
    throw InvalidArgument("coefficient vector must have " + std::to_string(kCoeffDims) +
                          " entries, got " + std::to_string(v.size()));
  }
  Coeff3DMM c;
  auto it = v.begin();
  for (auto* field : {&c.alpha_id, &c.beta_exp, &c.delta_tex, &c.gamma_light, &c.pose}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(field->size()), field->begin());
    it += static_cast<std::ptrdiff_t>(field->size());
  }
  return c;
}

std::vector<double> concat_coeffs(const Coeff3DMM& c) {
  std::vector<double> out;
  out.reserve(kCoeffDims);
  for (const auto* field : {&c.alpha_id, &c.beta_exp, &c.delta_tex, &c.gamma_light, &c.pose}) {
    out.insert(out.end(), field->begin(), field->end());
  }
  if (out.size() != static_cast<std::size_t>(kCoeffDims)) {
    throw ShapeError("coefficient fields have wrong lengths");
  }
  return out;
}

void FacePriorModel::validate() const {
  const Eigen::Index v = mean_shape.rows();
  if (mean_texture.rows() != v) throw ShapeError("mean texture has wrong vertex count");
  auto check = [v](const Eigen::MatrixXd& b, int cols, const char* name) {
    if (b.rows() != 3 * v || b.cols() != cols) {
      throw ShapeError(std::string(name) + " basis must be " + std::to_string(3 * v) + " x " +
                       std::to_string(cols));
    }
    if (!b.allFinite()) throw ShapeError(std::string(name) + " basis has non-finite entries");
  };
  check(basis_id, kIdDims, "identity");
  check(basis_exp, kExpDims, "expression");
  check(basis_tex, kTexDims, "texture");
  for (const auto& t : triangles) {
    for (auto i : t) {
      if (i >= static_cast<std::uint32_t>(v)) throw ShapeError("triangle index out of range");
    }
  }
}

FacePriorModel synth_prior_model(std::uint64_t seed, int vertices) {
  if (vertices < kMinPriorVertices) {
    throw InvalidArgument("prior model needs at least " + std::to_string(kMinPriorVertices) +
                          " vertices, got " + std::to_string(vertices));
  }
  const int cols = std::max(2, static_cast<int>(std::lround(std::sqrt(vertices * kAxisX / kAxisY))));
  const int rows = (vertices + cols - 1) / cols;

  FacePriorModel m;
  m.mean_shape.resize(vertices, 3);
  m.mean_texture.resize(vertices, 3);
  for (int i = 0; i < vertices; ++i) {
    const double u = static_cast<double>(i % cols) / (cols - 1);
    const double v = static_cast<double>(i / cols) / std::max(1, rows - 1);
    const double lon = (u - 0.5) * kPatchSpan;
    const double lat = (0.5 - v) * kPatchSpan;
    m.mean_shape.row(i) << kAxisX * std::cos(lat) * std::sin(lon), kAxisY * std::sin(lat),
        kAxisZ * std::cos(lat) * std::cos(lon);
    // Warm skin tone, slightly darker towards the chin and the sides.
    const double shade = 0.82 + 0.1 * std::cos(lon) - 0.08 * v;
    m.mean_texture.row(i) << 0.86 * shade, 0.66 * shade, 0.56 * shade;
  }
  m.triangles = grid_triangles(vertices, cols);

  Rng rng(mix_seed(seed, 0x3d3d));
  m.basis_id = smooth_orthonormal_basis(m.mean_shape, kIdDims, rng);
  m.basis_exp = smooth_orthonormal_basis(m.mean_shape, kExpDims, rng);
  m.basis_tex = smooth_orthonormal_basis(m.mean_shape, kTexDims, rng);
  return m;
}

VertexMatrix shape_from_coeffs(const FacePriorModel& model, const Coeff3DMM& c) {
  require_length(c.alpha_id, model.basis_id.cols(), "identity coefficients");
  require_length(c.beta_exp, model.basis_exp.cols(), "expression coefficients");
  if (model.basis_id.rows() != 3 * model.mean_shape.rows()) throw ShapeError("identity basis rows");
  const Eigen::VectorXd s =
      flatten(model.mean_shape) + model.basis_id * as_vector(c.alpha_id) + model.basis_exp * as_vector(c.beta_exp);
  return reshape_vertices(s);
}

VertexMatrix texture_from_coeffs(const FacePriorModel& model, const Coeff3DMM& c) {
  require_length(c.delta_tex, model.basis_tex.cols(), "texture coefficients");
  if (model.basis_tex.rows() != 3 * model.mean_texture.rows()) throw ShapeError("texture basis rows");
  return reshape_vertices(flatten(model.mean_texture) + model.basis_tex * as_vector(c.delta_tex));
}

std::array<double, kShBands> sh_basis(const Eigen::Vector3d& n) {
  using std::numbers::pi;
  static const double c0 = 1.0 / (2.0 * std::sqrt(pi));
  static const double c1 = std::sqrt(3.0 / (4.0 * pi));
  static const double c2 = 0.5 * std::sqrt(15.0 / pi);
  static const double c20 = 0.25 * std::sqrt(5.0 / pi);
  static const double c22 = 0.25 * std::sqrt(15.0 / pi);
  const double x = n.x(), y = n.y(), z = n.z();
  return {c0,          c1 * y,     c1 * z,     c1 * x, c2 * x * y,
          c2 * y * z,  c20 * (3.0 * z * z - 1.0), c2 * x * z, c22 * (x * x - y * y)};
}

VertexMatrix sh_shade(const VertexMatrix& texture, const VertexMatrix& normals,
                      std::span<const double> gamma) {
  require_length(gamma, kLightDims, "sh_shade gamma");
  if (texture.rows() != normals.rows()) throw ShapeError("sh_shade: texture and normals differ in length");
  VertexMatrix out(texture.rows(), 3);
  for (Eigen::Index i = 0; i < texture.rows(); ++i) {
    const Eigen::Vector3d n = normals.row(i).transpose();
    if (!(std::abs(n.norm() - 1.0) <= 1e-6)) {
      throw InvalidArgument("sh_shade: normal " + std::to_string(i) + " is not unit length");
    }
    const auto phi = sh_basis(n);
    for (int k = 0; k < 3; ++k) {
      double light = 0.0;
      for (int b = 0; b < kShBands; ++b) light += gamma[k * kShBands + b] * phi[b];
      out(i, k) = texture(i, k) * light;
    }
  }
  return out;
}

VertexMatrix vertex_normals(const VertexMatrix& positions, std::span<const Triangle> triangles) {
  VertexMatrix acc = VertexMatrix::Zero(positions.rows(), 3);
  for (const auto& t : triangles) {
    const Eigen::Vector3d a = positions.row(t[0]).transpose();
    const Eigen::Vector3d b = positions.row(t[1]).transpose();
    const Eigen::Vector3d c = positions.row(t[2]).transpose();
    // Unnormalized cross product has length twice the triangle area.
    const Eigen::RowVector3d fn = (b - a).cross(c - a).transpose();
    for (auto i : t) acc.row(i) += fn;
  }
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    const double len = acc.row(i).norm();
    if (len > 0.0) {
      acc.row(i) /= len;
    } else {
      acc.row(i) << 0.0, 0.0, 1.0;
    }
  }
  return acc;
}

Eigen::Matrix3d euler_rotation(double rx, double ry, double rz) {
  return (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

std::size_t RenderedPrior::coverage() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

RenderedPrior rasterize(const VertexMatrix& positions, const VertexMatrix& colors,
                        std::span<const Triangle> triangles, int height, int width) {
  if (height < 1 || width < 1) throw InvalidArgument("rasterize: empty image size");
  if (colors.rows() != positions.rows()) throw ShapeError("rasterize: colors and positions differ in length");
  RenderedPrior out;
  out.image = Tensor(height, width, 3, kBackground);
  out.depth = Tensor(height, width, 1, std::numeric_limits<double>::infinity());
  out.mask.assign(static_cast<std::size_t>(height) * width, 0);

  const auto n = static_cast<std::uint32_t>(positions.rows());
  for (const auto& t : triangles) {
    if (t[0] >= n || t[1] >= n || t[2] >= n) throw ShapeError("rasterize: triangle index out of range");
    const double x0 = positions(t[0], 0), y0 = positions(t[0], 1);
    const double x1 = positions(t[1], 0), y1 = positions(t[1], 1);
    const double x2 = positions(t[2], 0), y2 = positions(t[2], 1);
    const double area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    if (!(std::abs(area) > 1e-14)) continue;

    const double xmin = std::min({x0, x1, x2}), xmax = std::max({x0, x1, x2});
    const double ymin = std::min({y0, y1, y2}), ymax = std::max({y0, y1, y2});
    const int cmin = std::max(0, static_cast<int>(std::ceil((xmin + 1.0) * 0.5 * width - 0.5)));
    const int cmax = std::min(width - 1, static_cast<int>(std::floor((xmax + 1.0) * 0.5 * width - 0.5)));
    const int rmin = std::max(0, static_cast<int>(std::ceil((1.0 - ymax) * 0.5 * height - 0.5)));
    const int rmax = std::min(height - 1, static_cast<int>(std::floor((1.0 - ymin) * 0.5 * height - 0.5)));

    for (int r = rmin; r <= rmax; ++r) {
      const double py = 1.0 - (r + 0.5) / height * 2.0;
      for (int c = cmin; c <= cmax; ++c) {
        const double px = (c + 0.5) / width * 2.0 - 1.0;
        const double w0 = ((x1 - px) * (y2 - py) - (x2 - px) * (y1 - py)) / area;
        const double w1 = ((x2 - px) * (y0 - py) - (x0 - px) * (y2 - py)) / area;
        const double w2 = ((x0 - px) * (y1 - py) - (x1 - px) * (y0 - py)) / area;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        const double d = -(w0 * positions(t[0], 2) + w1 * positions(t[1], 2) + w2 * positions(t[2], 2));
        double& zbuf = out.depth.at(r, c, 0);
        if (!(d < zbuf)) continue;
        zbuf = d;
        out.mask[static_cast<std::size_t>(r) * width + c] = 1;
        for (int k = 0; k < 3; ++k) {
          const double v = w0 * colors(t[0], k) + w1 * colors(t[1], k) + w2 * colors(t[2], k);
          out.image.at(r, c, k) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

RenderedPrior render_mesh(const FacePriorModel& model, const Coeff3DMM& c, int height, int width) {
  if (height < 8 || width < 8) throw InvalidArgument("render_mesh: image must be at least 8x8");
  require_length(c.pose, kPoseDims, "pose");
  const VertexMatrix shape = shape_from_coeffs(model, c);
  const VertexMatrix texture = texture_from_coeffs(model, c).cwiseMax(0.0).cwiseMin(1.0);

  const Eigen::Matrix3d rot = euler_rotation(c.pose[0], c.pose[1], c.pose[2]);
  const Eigen::RowVector3d trans(c.pose[3], c.pose[4], c.pose[5]);
  VertexMatrix posed = shape * rot.transpose();
  posed.rowwise() += trans;

  const VertexMatrix normals = vertex_normals(posed, model.triangles);
  const VertexMatrix colors = sh_shade(texture, normals, c.gamma_light);
  return rasterize(posed, colors, model.triangles, height, width);
}

Coeff3DMM random_coeffs(std::uint64_t seed, const FacePriorModel& model) {
  Rng rng(mix_seed(seed, 0xc0ef));
  const double rows = 3.0 * model.vertex_count();
  // Per-coordinate RMS offsets of roughly 3% (shape), 2% (expression) and 4% (texture).
  const double s_id = 0.03 * std::sqrt(rows / kIdDims);
  const double s_exp = 0.02 * std::sqrt(rows / kExpDims);
  const double s_tex = 0.04 * std::sqrt(rows / kTexDims);
  Coeff3DMM c;
  for (auto& v : c.alpha_id) v = s_id * rng.normal();
  for (auto& v : c.beta_exp) v = s_exp * rng.normal();
  for (auto& v : c.delta_tex) v = s_tex * rng.normal();

  const double ambient = (0.8 + 0.2 * rng.uniform()) / sh_basis(Eigen::Vector3d::UnitZ())[0];
  const Eigen::Vector3d dir(rng.uniform(-0.4, 0.4), rng.uniform(-0.2, 0.4), rng.uniform(0.1, 0.4));
  for (int k = 0; k < 3; ++k) {
    double* g = &c.gamma_light[static_cast<std::size_t>(k) * kShBands];
    g[0] = ambient * (1.0 + 0.05 * rng.normal());
    g[1] = dir.y();
    g[2] = dir.z();
    g[3] = dir.x();
    for (int b = 4; b < kShBands; ++b) g[b] = 0.05 * rng.normal();
  }
  c.pose = {rng.uniform(-0.25, 0.25), rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.1),
            rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0.0};
  return c;
}

void write_prior_model(const std::filesystem::path& path, const FacePriorModel& model) {
  model.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write prior model " + path.string());
  os.write(kPriorMagic, sizeof(kPriorMagic));
  detail::write_pod<std::uint32_t>(os, kPriorModelVersion);
  detail::write_pod<std::uint32_t>(os, 0);
  for (auto d : {model.vertex_count(), static_cast<int>(model.triangles.size()), kIdDims, kExpDims, kTexDims}) {
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  }
  auto put = [&os](const auto& m) {
    // Row-major order regardless of the Eigen storage order.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    detail::write_floats(os, std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())));
  };
  put(model.mean_shape);
  put(model.mean_texture);
  put(model.basis_id);
  put(model.basis_exp);
  put(model.basis_tex);
  for (const auto& t : model.triangles) detail::write_array<std::uint32_t>(os, t);
  if (!os) throw IoError("failed writing prior model " + path.string());
}

FacePriorModel read_prior_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open prior model " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(magic, magic + 8, kPriorMagic)) throw IoError(path.string() + " is not a prior model");
  if (detail::read_pod<std::uint32_t>(is) != kPriorModelVersion) {
    throw IoError("unsupported prior model version in " + path.string());
  }
  detail::read_pod<std::uint32_t>(is);
  const auto v = detail::read_pod<std::uint32_t>(is);
  const auto f = detail::read_pod<std::uint32_t>(is);
  const auto n_id = detail::read_pod<std::uint32_t>(is);
  const auto n_exp = detail::read_pod<std::uint32_t>(is);
  const auto n_tex = detail::read_pod<std::uint32_t>(is);
  if (n_id != kIdDims || n_exp != kExpDims || n_tex != kTexDims) {
    throw IoError("prior model " + path.string() + " has an unsupported coefficient partition");
  }
  if (v > (1u << 24) || f > (1u << 26)) throw IoError("prior model " + path.string() + " is implausibly large");
  auto get = [&is](auto& m, Eigen::Index rows, Eigen::Index cols) {
    const auto vals = detail::read_array<float>(is, static_cast<std::size_t>(rows * cols));
    m.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = vals[static_cast<std::size_t>(r * cols + c)];
    }
  };
  FacePriorModel m;
  get(m.mean_shape, v, 3);
  get(m.mean_texture, v, 3);
  get(m.basis_id, 3 * Eigen::Index{v}, n_id);
  get(m.basis_exp, 3 * Eigen::Index{v}, n_exp);
  get(m.basis_tex, 3 * Eigen::Index{v}, n_tex);
  const auto tri = detail::read_array<std::uint32_t>(is, static_cast<std::size_t>(f) * 3);
  m.triangles.resize(f);
  for (std::size_t i = 0; i < f; ++i) m.triangles[i] = {tri[3 * i], tri[3 * i + 1], tri[3 * i + 2]};
  try {
    m.validate();
  } catch (const ShapeError& e) {
    throw IoError("invalid prior model " + path.string() + ": " + e.what());
  }
  return m;
}

CoeffTable read_coeff_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open coefficient file " + path.string());
  CoeffTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string stem;
    if (!(ls >> stem) || stem.front() == '#') continue;
    std::vector<double> values;
    values.reserve(kCoeffDims);
    std::string tok;
    while (ls >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size() || !std::isfinite(v)) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad coefficient '" + tok + "'");
      }
      values.push_back(v);
    }
    if (values.size() != static_cast<std::size_t>(kCoeffDims)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(kCoeffDims) + " coefficients after the stem, got " +
                    std::to_string(values.size()));
    }
    if (!table.emplace(stem, std::move(values)).second) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": duplicate stem '" + stem + "'");
    }
  }
  return table;
}

void write_coeff_file(const std::filesystem::path& path, const CoeffTable& table) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write coefficient file " + path.string());
  char buf[32];
  for (const auto& [stem, values] : table) {
    if (values.size() != static_cast<std::size_t>(kCoeffDims)) {
      throw InvalidArgument("coefficients for '" + stem + "' have wrong length");
    }
    os << stem;
    for (double v : values) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw IoError("failed writing coefficient file " + path.string());
}

}  // namespace facediff
