#include "facediff/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "facediff/errors.hpp"
#include "facediff/rng.hpp"

namespace facediff {

namespace {

constexpr std::array<int, 64> kLumaBase = {
#include "jpeg/luma_q50.tbl"
};
constexpr std::array<int, 64> kChromaBase = {
#include "jpeg/chroma_q50.tbl"
};

// Mirror index into [0, n) without repeating the edge sample.
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

double cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::vector<int> index;
  std::vector<double> weight;
};

std::vector<Taps> resize_taps(int in, int out) {
  const double scale = static_cast<double>(in) / out;
  const double support = std::max(1.0, scale);
  std::vector<Taps> taps(out);
  for (int o = 0; o < out; ++o) {
    const double center = (o + 0.5) * scale - 0.5;
    const int lo = static_cast<int>(std::floor(center - 2.0 * support)) + 1;
    const int hi = static_cast<int>(std::floor(center + 2.0 * support));
    double sum = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double w = cubic((i - center) / support);
      if (w == 0.0) continue;
      taps[o].index.push_back(std::clamp(i, 0, in - 1));
      taps[o].weight.push_back(w);
      sum += w;
    }
    for (double& w : taps[o].weight) w /= sum;
  }
  return taps;
}

using Block = std::array<double, 64>;

const std::array<double, 64>& dct_matrix() {
  static const std::array<double, 64> c = [] {
    std::array<double, 64> m{};
    for (int u = 0; u < 8; ++u) {
      const double alpha = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) m[u * 8 + x] = alpha * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
    return m;
  }();
  return c;
}

// out = C * b * C^T (forward) or C^T * b * C (inverse).
Block dct2(const Block& b, bool inverse) {
  const auto& c = dct_matrix();
  auto m = [&](int i, int j) { return inverse ? c[j * 8 + i] : c[i * 8 + j]; };
  Block tmp{}, out{};
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += m(i, k) * b[k * 8 + j];
      tmp[i * 8 + j] = s;
    }
  }
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += tmp[i * 8 + k] * m(j, k);
      out[i * 8 + j] = s;
    }
  }
  return out;
}

void require_image(const Tensor& img, const char* what) {
  if (img.empty()) throw InvalidArgument(std::string(what) + ": empty image");
}

}  // namespace

DegradationParams sample_degradation(std::uint64_t seed, const DegradationRanges& ranges) {
  Rng rng(mix_seed(seed, 0xde9ade));
  DegradationParams p;
  p.sigma_blur = rng.uniform(ranges.sigma_lo, ranges.sigma_hi);
  p.r_down = rng.uniform(ranges.r_lo, ranges.r_hi);
  p.delta_noise = rng.uniform(ranges.delta_lo, ranges.delta_hi);
  p.q_jpeg = static_cast<int>(rng.uniform_int(ranges.q_lo, ranges.q_hi));
  return p;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("blur sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

Tensor gaussian_blur(const Tensor& img, double sigma) {
  require_image(img, "gaussian_blur");
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int h = img.height, w = img.width, ch = img.channels;
  Tensor tmp(h, w, ch), out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) s += k[i + radius] * img.at(y, reflect_index(x + i, w), c);
        tmp.at(y, x, c) = s;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) s += k[i + radius] * tmp.at(reflect_index(y + i, h), x, c);
        out.at(y, x, c) = s;
      }
    }
  }
  return out;
}

Tensor bicubic_resize(const Tensor& img, int out_h, int out_w) {
  require_image(img, "bicubic_resize");
  if (out_h < 1 || out_w < 1) throw InvalidArgument("bicubic_resize: output size must be positive");
  const auto tx = resize_taps(img.width, out_w);
  const auto ty = resize_taps(img.height, out_h);
  const int ch = img.channels;
  Tensor tmp(img.height, out_w, ch), out(out_h, out_w, ch);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < tx[x].index.size(); ++i) s += tx[x].weight[i] * img.at(y, tx[x].index[i], c);
        tmp.at(y, x, c) = s;
      }
    }
  }
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < ty[y].index.size(); ++i) s += ty[y].weight[i] * tmp.at(ty[y].index[i], x, c);
        out.at(y, x, c) = s;
      }
    }
  }
  return out;
}

int downsampled_size(int size, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw InvalidArgument("downsampling factor must be positive");
  return static_cast<int>(std::lround(size / r));
}

int jpeg_quality_scale(int q) {
  if (q < 1 || q > 100) throw InvalidArgument("JPEG quality must be in [1, 100], got " + std::to_string(q));
  return q < 50 ? 5000 / q : 200 - 2 * q;
}

std::array<int, 64> jpeg_table(bool chroma, int q) {
  const int s = jpeg_quality_scale(q);
  std::array<int, 64> t = chroma ? kChromaBase : kLumaBase;
  for (int& v : t) v = std::clamp((v * s + 50) / 100, 1, 255);
  return t;
}

const char* jpeg_tables_version() { return FACEDIFF_JPEG_TABLES_VERSION; }

Tensor jpeg_approx(const Tensor& img, int q) {
  require_image(img, "jpeg_approx");
  if (img.channels != 3) throw ShapeError("jpeg_approx expects an RGB image, got " + img.shape_string());
  const std::array<std::array<int, 64>, 3> tables = {jpeg_table(false, q), jpeg_table(true, q), jpeg_table(true, q)};
  const int h = img.height, w = img.width;

  // YCbCr planes on the 0-255 scale, level-shifted by 128.
  std::array<std::vector<double>, 3> plane;
  for (auto& p : plane) p.resize(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = img.at(y, x, 0) * 255.0, g = img.at(y, x, 1) * 255.0, b = img.at(y, x, 2) * 255.0;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      plane[0][i] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
      plane[1][i] = -0.168736 * r - 0.331264 * g + 0.5 * b;
      plane[2][i] = 0.5 * r - 0.418688 * g - 0.081312 * b;
    }
  }

  for (int ch = 0; ch < 3; ++ch) {
    const auto& table = tables[ch];
    auto& p = plane[ch];
    for (int by = 0; by < h; by += 8) {
      for (int bx = 0; bx < w; bx += 8) {
        Block b{};
        for (int i = 0; i < 8; ++i) {
          for (int j = 0; j < 8; ++j) {
            const int y = std::min(by + i, h - 1), x = std::min(bx + j, w - 1);
            b[i * 8 + j] = p[static_cast<std::size_t>(y) * w + x];
          }
        }
        Block f = dct2(b, false);
        for (int k = 0; k < 64; ++k) f[k] = std::round(f[k] / table[k]) * table[k];
        const Block rec = dct2(f, true);
        for (int i = 0; i < 8 && by + i < h; ++i) {
          for (int j = 0; j < 8 && bx + j < w; ++j) p[static_cast<std::size_t>(by + i) * w + bx + j] = rec[i * 8 + j];
        }
      }
    }
  }

  Tensor out(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double yy = plane[0][i] + 128.0, cb = plane[1][i], cr = plane[2][i];
      const double rgb[3] = {yy + 1.402 * cr, yy - 0.344136 * cb - 0.714136 * cr, yy + 1.772 * cb};
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = std::clamp(rgb[c] / 255.0, 0.0, 1.0);
    }
  }
  return out;
}

Tensor degrade_pipeline(const Tensor& y, const DegradationParams& p, std::uint64_t noise_seed) {
  if (y.height < 8 || y.width < 8) throw InvalidArgument("degrade: image must be at least 8x8, got " + y.shape_string());
  if (!(p.delta_noise >= 0.0)) throw InvalidArgument("degrade: noise std must be non-negative");
  const int dh = downsampled_size(y.height, p.r_down);
  const int dw = downsampled_size(y.width, p.r_down);
  if (dh < 2 || dw < 2) {
    throw InvalidArgument("degrade: downsampling " + y.shape_string() + " by " + std::to_string(p.r_down) +
                          " leaves fewer than 2 pixels");
  }
  jpeg_quality_scale(p.q_jpeg);

  Tensor x = gaussian_blur(y, p.sigma_blur);
  x = bicubic_resize(x, dh, dw);
  Rng rng(mix_seed(noise_seed, 0x4015e));
  const double std = p.delta_noise / 255.0;
  for (double& v : x.data) v = std::clamp(v + std * rng.normal(), 0.0, 1.0);
  x = jpeg_approx(x, p.q_jpeg);
  x = bicubic_resize(x, y.height, y.width);
  for (double& v : x.data) v = std::clamp(v, 0.0, 1.0);
  return x;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write manifest " + path.string());
  os << "filename,sigma,r,delta,q,noise_seed\n";
  char buf[160];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g,%d,%llu", row.params.sigma_blur, row.params.r_down,
                  row.params.delta_noise, row.params.q_jpeg, static_cast<unsigned long long>(row.noise_seed));
    os << row.filename << buf << '\n';
  }
  if (!os) throw IoError("failed writing manifest " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "filename,sigma,r,delta,q,noise_seed") throw IoError("unexpected manifest header in " + path.string());
  std::vector<ManifestRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field[6];
    for (auto& f : field) std::getline(ls, f, ',');
    try {
      ManifestRow r;
      r.filename = field[0];
      r.params.sigma_blur = std::stod(field[1]);
      r.params.r_down = std::stod(field[2]);
      r.params.delta_noise = std::stod(field[3]);
      r.params.q_jpeg = std::stoi(field[4]);
      r.noise_seed = std::stoull(field[5]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw IoError("malformed manifest row in " + path.string() + ": " + line);
    }
  }
  return rows;
}

}  // namespace facediff
