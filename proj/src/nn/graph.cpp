#include "facediff/nn/graph.hpp"

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <string>

#include "facediff/errors.hpp"

namespace facediff::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct ConvGeometry {
  int in_h, in_w, in_c, out_h, out_w, out_c, kernel, stride, pad;
  int patch() const { return kernel * kernel * in_c; }
  int out_pixels() const { return out_h * out_w; }
};

RowMat im2col(const Tensor& x, const ConvGeometry& g) {
  RowMat col = RowMat::Zero(g.out_pixels(), g.patch());
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      double* row = col.data() + static_cast<std::ptrdiff_t>(oy * g.out_w + ox) * g.patch();
      for (int ky = 0; ky < g.kernel; ++ky) {
        const int iy = oy * g.stride + ky - g.pad;
        if (iy < 0 || iy >= g.in_h) continue;
        for (int kx = 0; kx < g.kernel; ++kx) {
          const int ix = ox * g.stride + kx - g.pad;
          if (ix < 0 || ix >= g.in_w) continue;
          const double* src = &x.data[(static_cast<std::size_t>(iy) * g.in_w + ix) * g.in_c];
          std::copy(src, src + g.in_c, row + (ky * g.kernel + kx) * g.in_c);
        }
      }
    }
  }
  return col;
}

void col2im_add(const RowMat& col, const ConvGeometry& g, Tensor& dx) {
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      const double* row = col.data() + static_cast<std::ptrdiff_t>(oy * g.out_w + ox) * g.patch();
      for (int ky = 0; ky < g.kernel; ++ky) {
        const int iy = oy * g.stride + ky - g.pad;
        if (iy < 0 || iy >= g.in_h) continue;
        for (int kx = 0; kx < g.kernel; ++kx) {
          const int ix = ox * g.stride + kx - g.pad;
          if (ix < 0 || ix >= g.in_w) continue;
          double* dst = &dx.data[(static_cast<std::size_t>(iy) * g.in_w + ix) * g.in_c];
          const double* src = row + (ky * g.kernel + kx) * g.in_c;
          for (int c = 0; c < g.in_c; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) { return g.kernel == 1 && g.stride == 1; }

void require_vector(const Tensor& v, int channels, const char* what) {
  if (v.height != 1 || v.width != 1 || v.channels != channels) {
    throw ShapeError(std::string(what) + ": expected vector of " + std::to_string(channels) +
                     " channels, got " + v.shape_string());
  }
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double sigmoid_value(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

NodeId Graph::push(Tensor value, bool needs_grad, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  if (needs_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

Tensor& Graph::grad(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && n.value.size() > 0) {
    n.grad = Tensor(n.value.height, n.value.width, n.value.channels);
  }
  return n.grad;
}

NodeId Graph::constant(Tensor value) { return push(std::move(value), false, nullptr); }

NodeId Graph::param(ParamHandle h) {
  if (params_ == nullptr) throw InvalidArgument("graph has no bound parameter set");
  if (auto it = param_nodes_.find(h.index); it != param_nodes_.end()) return it->second;
  const auto vals = params_->values(h);
  Tensor t = Tensor::vector(vals);
  const NodeId id = push(std::move(t), true, nullptr);
  nodes_[id].param_index = static_cast<std::ptrdiff_t>(h.index);
  param_nodes_.emplace(h.index, id);
  return id;
}

NodeId Graph::conv2d(NodeId x, NodeId weight, NodeId bias, int kernel, int stride) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(bias);
  const int out_c = bv.channels;
  const int in_c = xv.channels;
  if (value(weight).size() != static_cast<std::size_t>(kernel) * kernel * in_c * out_c) {
    throw ShapeError("conv2d: weight size " + std::to_string(value(weight).size()) +
                     " does not match kernel " + std::to_string(kernel) + " with " +
                     std::to_string(in_c) + " -> " + std::to_string(out_c) + " channels");
  }
  const int pad = kernel / 2;
  ConvGeometry g{xv.height, xv.width, in_c, (xv.height + 2 * pad - kernel) / stride + 1,
                 (xv.width + 2 * pad - kernel) / stride + 1, out_c, kernel, stride, pad};

  Tensor out(g.out_h, g.out_w, out_c);
  MatMap out_m(out.data.data(), g.out_pixels(), out_c);
  ConstMatMap w_m(value(weight).data.data(), g.patch(), out_c);
  if (is_pointwise(g)) {
    ConstMatMap x_m(xv.data.data(), g.out_pixels(), in_c);
    out_m.noalias() = x_m * w_m;
  } else {
    out_m.noalias() = im2col(xv, g) * w_m;
  }
  const Eigen::Map<const Eigen::RowVectorXd> b_m(bv.data.data(), out_c);
  out_m.rowwise() += b_m;

  const bool ng = needs(x) || needs(weight) || needs(bias);
  return push(std::move(out), ng, [x, weight, bias, g](Graph& gr, NodeId self) {
    const Tensor& up = gr.upstream(self);
    ConstMatMap up_m(up.data.data(), g.out_pixels(), g.out_c);
    if (gr.needs(bias)) {
      // plain loop: Eigen's vectorized reduction peels by address alignment,
      // which would make the summation order vary between runs
      double* db = gr.grad(bias).data.data();
      for (int p = 0; p < g.out_pixels(); ++p) {
        const double* row = up.data.data() + static_cast<std::ptrdiff_t>(p) * g.out_c;
        for (int c = 0; c < g.out_c; ++c) db[c] += row[c];
      }
    }
    const bool pointwise = is_pointwise(g);
    if (gr.needs(weight)) {
      MatMap dw(gr.grad(weight).data.data(), g.patch(), g.out_c);
      if (pointwise) {
        ConstMatMap x_m(gr.value(x).data.data(), g.out_pixels(), g.in_c);
        dw.noalias() += x_m.transpose() * up_m;
      } else {
        dw.noalias() += im2col(gr.value(x), g).transpose() * up_m;
      }
    }
    if (gr.needs(x)) {
      ConstMatMap w_m(gr.value(weight).data.data(), g.patch(), g.out_c);
      if (pointwise) {
        MatMap dx(gr.grad(x).data.data(), g.out_pixels(), g.in_c);
        dx.noalias() += up_m * w_m.transpose();
      } else {
        RowMat dcol = up_m * w_m.transpose();
        col2im_add(dcol, g, gr.grad(x));
      }
    }
  });
}

NodeId Graph::add(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "add");
  Tensor out = value(a);
  const Tensor& bv = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    for (NodeId in : {a, b}) {
      if (!g.needs(in)) continue;
      Tensor& d = g.grad(in);
      for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += up.data[i];
    }
  });
}

NodeId Graph::add_channelwise(NodeId x, NodeId v) {
  const Tensor& xv = value(x);
  require_vector(value(v), xv.channels, "add_channelwise");
  Tensor out = xv;
  const auto& vv = value(v).data;
  const int c = xv.channels;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += vv[i % c];
  return push(std::move(out), needs(x) || needs(v), [x, v, c](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    if (g.needs(x)) {
      Tensor& d = g.grad(x);
      for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += up.data[i];
    }
    if (g.needs(v)) {
      Tensor& d = g.grad(v);
      for (std::size_t i = 0; i < up.size(); ++i) d.data[i % c] += up.data[i];
    }
  });
}

NodeId Graph::mul_channelwise(NodeId x, NodeId v) {
  const Tensor& xv = value(x);
  require_vector(value(v), xv.channels, "mul_channelwise");
  Tensor out = xv;
  const auto& vv = value(v).data;
  const int c = xv.channels;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= vv[i % c];
  return push(std::move(out), needs(x) || needs(v), [x, v, c](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    if (g.needs(x)) {
      Tensor& d = g.grad(x);
      const auto& vv = g.value(v).data;
      for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += up.data[i] * vv[i % c];
    }
    if (g.needs(v)) {
      Tensor& d = g.grad(v);
      const auto& xd = g.value(x).data;
      for (std::size_t i = 0; i < up.size(); ++i) d.data[i % c] += up.data[i] * xd[i];
    }
  });
}

NodeId Graph::scale(NodeId x, NodeId s) {
  if (value(s).size() != 1) throw ShapeError("scale: factor must be a single value");
  const double f = value(s).data[0];
  Tensor out = value(x);
  for (double& o : out.data) o *= f;
  return push(std::move(out), needs(x) || needs(s), [x, s](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    const Tensor& xv = g.value(x);
    if (g.needs(x)) {
      const double f = g.value(s).data[0];
      Tensor& d = g.grad(x);
      for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += f * up.data[i];
    }
    if (g.needs(s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < up.size(); ++i) acc += up.data[i] * xv.data[i];
      g.grad(s).data[0] += acc;
    }
  });
}

NodeId Graph::mul_constant(NodeId x, double c) {
  Tensor out = value(x);
  for (double& o : out.data) o *= c;
  return push(std::move(out), needs(x), [x, c](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    Tensor& d = g.grad(x);
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += c * up.data[i];
  });
}

NodeId Graph::add_constant(NodeId x, double c) {
  Tensor out = value(x);
  for (double& o : out.data) o += c;
  return push(std::move(out), needs(x), [x](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    Tensor& d = g.grad(x);
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += up.data[i];
  });
}

NodeId Graph::slice_channels(NodeId x, int offset, int count) {
  const Tensor& xv = value(x);
  if (offset < 0 || count < 0 || offset + count > xv.channels) {
    throw ShapeError("slice_channels: range outside " + xv.shape_string());
  }
  Tensor out(xv.height, xv.width, count);
  const int c = xv.channels;
  for (std::size_t p = 0; p < xv.pixels(); ++p) {
    for (int k = 0; k < count; ++k) out.data[p * count + k] = xv.data[p * c + offset + k];
  }
  return push(std::move(out), needs(x), [x, offset, count, c](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    Tensor& d = g.grad(x);
    for (std::size_t p = 0; p < d.pixels(); ++p) {
      for (int k = 0; k < count; ++k) d.data[p * c + offset + k] += up.data[p * count + k];
    }
  });
}

NodeId Graph::concat_channels(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.height != bv.height || av.width != bv.width) {
    throw ShapeError("concat_channels: spatial mismatch " + av.shape_string() + " vs " +
                     bv.shape_string());
  }
  const int ca = av.channels;
  const int cb = bv.channels;
  Tensor out(av.height, av.width, ca + cb);
  for (std::size_t p = 0; p < av.pixels(); ++p) {
    std::copy_n(&av.data[p * ca], ca, &out.data[p * (ca + cb)]);
    std::copy_n(&bv.data[p * cb], cb, &out.data[p * (ca + cb) + ca]);
  }
  return push(std::move(out), needs(a) || needs(b), [a, b, ca, cb](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    const std::size_t pixels = up.pixels();
    if (g.needs(a)) {
      Tensor& d = g.grad(a);
      for (std::size_t p = 0; p < pixels; ++p)
        for (int k = 0; k < ca; ++k) d.data[p * ca + k] += up.data[p * (ca + cb) + k];
    }
    if (g.needs(b)) {
      Tensor& d = g.grad(b);
      for (std::size_t p = 0; p < pixels; ++p)
        for (int k = 0; k < cb; ++k) d.data[p * cb + k] += up.data[p * (ca + cb) + ca + k];
    }
  });
}

NodeId Graph::silu(NodeId x) {
  Tensor out = value(x);
  for (double& o : out.data) o = o * sigmoid_value(o);
  return push(std::move(out), needs(x), [x](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    const Tensor& xv = g.value(x);
    Tensor& d = g.grad(x);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double s = sigmoid_value(xv.data[i]);
      d.data[i] += up.data[i] * s * (1.0 + xv.data[i] * (1.0 - s));
    }
  });
}

NodeId Graph::gelu(NodeId x) {
  Tensor out = value(x);
  for (double& o : out.data) o = gelu_value(o);
  return push(std::move(out), needs(x), [x](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    const Tensor& xv = g.value(x);
    Tensor& d = g.grad(x);
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += up.data[i] * gelu_grad(xv.data[i]);
  });
}

NodeId Graph::sigmoid(NodeId x) {
  Tensor out = value(x);
  for (double& o : out.data) o = sigmoid_value(o);
  return push(std::move(out), needs(x), [x](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    const Tensor& y = g.value(self);
    Tensor& d = g.grad(x);
    for (std::size_t i = 0; i < d.size(); ++i) {
      d.data[i] += up.data[i] * y.data[i] * (1.0 - y.data[i]);
    }
  });
}

NodeId Graph::group_norm(NodeId x, NodeId gamma, NodeId beta, int groups, double eps) {
  const Tensor& xv = value(x);
  const int c = xv.channels;
  if (groups <= 0 || c % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(groups) + " groups do not divide " +
                     std::to_string(c) + " channels");
  }
  require_vector(value(gamma), c, "group_norm gamma");
  require_vector(value(beta), c, "group_norm beta");
  const int per = c / groups;
  const std::size_t pixels = xv.pixels();
  const double n = static_cast<double>(pixels) * per;

  Tensor normalized(xv.height, xv.width, c);
  std::vector<double> inv_std(static_cast<std::size_t>(groups));
  for (int gi = 0; gi < groups; ++gi) {
    double mean = 0.0;
    for (std::size_t p = 0; p < pixels; ++p)
      for (int k = 0; k < per; ++k) mean += xv.data[p * c + gi * per + k];
    mean /= n;
    double var = 0.0;
    for (std::size_t p = 0; p < pixels; ++p)
      for (int k = 0; k < per; ++k) {
        const double dv = xv.data[p * c + gi * per + k] - mean;
        var += dv * dv;
      }
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[gi] = is;
    for (std::size_t p = 0; p < pixels; ++p)
      for (int k = 0; k < per; ++k) {
        const std::size_t i = p * c + gi * per + k;
        normalized.data[i] = (xv.data[i] - mean) * is;
      }
  }
  Tensor out(xv.height, xv.width, c);
  const auto& gv = value(gamma).data;
  const auto& bv = value(beta).data;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = gv[i % c] * normalized.data[i] + bv[i % c];
  }

  const bool ng = needs(x) || needs(gamma) || needs(beta);
  return push(std::move(out), ng,
              [x, gamma, beta, groups, per, c, n, normalized = std::move(normalized),
               inv_std = std::move(inv_std)](Graph& g, NodeId self) {
                const Tensor& up = g.upstream(self);
                const std::size_t pixels = up.pixels();
                if (g.needs(gamma)) {
                  Tensor& d = g.grad(gamma);
                  for (std::size_t i = 0; i < up.size(); ++i)
                    d.data[i % c] += up.data[i] * normalized.data[i];
                }
                if (g.needs(beta)) {
                  Tensor& d = g.grad(beta);
                  for (std::size_t i = 0; i < up.size(); ++i) d.data[i % c] += up.data[i];
                }
                if (!g.needs(x)) return;
                const auto& gv = g.value(gamma).data;
                Tensor& dx = g.grad(x);
                for (int gi = 0; gi < groups; ++gi) {
                  double sum_dn = 0.0;
                  double sum_dn_n = 0.0;
                  for (std::size_t p = 0; p < pixels; ++p)
                    for (int k = 0; k < per; ++k) {
                      const std::size_t i = p * c + gi * per + k;
                      const double dn = up.data[i] * gv[gi * per + k];
                      sum_dn += dn;
                      sum_dn_n += dn * normalized.data[i];
                    }
                  for (std::size_t p = 0; p < pixels; ++p)
                    for (int k = 0; k < per; ++k) {
                      const std::size_t i = p * c + gi * per + k;
                      const double dn = up.data[i] * gv[gi * per + k];
                      dx.data[i] += inv_std[gi] / n *
                                    (n * dn - sum_dn - normalized.data[i] * sum_dn_n);
                    }
                }
              });
}

NodeId Graph::layer_norm_channels(NodeId x, double eps) {
  const Tensor& xv = value(x);
  const int c = xv.channels;
  const std::size_t pixels = xv.pixels();
  Tensor out(xv.height, xv.width, c);
  std::vector<double> inv_std(pixels);
  for (std::size_t p = 0; p < pixels; ++p) {
    const double* src = &xv.data[p * c];
    double mean = 0.0;
    for (int k = 0; k < c; ++k) mean += src[k];
    mean /= c;
    double var = 0.0;
    for (int k = 0; k < c; ++k) var += (src[k] - mean) * (src[k] - mean);
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[p] = is;
    for (int k = 0; k < c; ++k) out.data[p * c + k] = (src[k] - mean) * is;
  }
  return push(std::move(out), needs(x), [x, c, inv_std = std::move(inv_std)](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    const Tensor& y = g.value(self);
    Tensor& dx = g.grad(x);
    for (std::size_t p = 0; p < inv_std.size(); ++p) {
      double sum_d = 0.0;
      double sum_dy = 0.0;
      for (int k = 0; k < c; ++k) {
        sum_d += up.data[p * c + k];
        sum_dy += up.data[p * c + k] * y.data[p * c + k];
      }
      for (int k = 0; k < c; ++k) {
        const std::size_t i = p * c + k;
        dx.data[i] += inv_std[p] / c * (c * up.data[i] - sum_d - y.data[i] * sum_dy);
      }
    }
  });
}

NodeId Graph::global_avg_pool(NodeId x) {
  const Tensor& xv = value(x);
  const int c = xv.channels;
  const double inv = 1.0 / static_cast<double>(xv.pixels());
  Tensor out(1, 1, c);
  for (std::size_t i = 0; i < xv.size(); ++i) out.data[i % c] += xv.data[i];
  for (double& o : out.data) o *= inv;
  return push(std::move(out), needs(x), [x, c, inv](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    Tensor& d = g.grad(x);
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += up.data[i % c] * inv;
  });
}

NodeId Graph::upsample_nearest2(NodeId x) {
  const Tensor& xv = value(x);
  const int c = xv.channels;
  Tensor out(xv.height * 2, xv.width * 2, c);
  for (int y = 0; y < out.height; ++y)
    for (int xx = 0; xx < out.width; ++xx)
      std::copy_n(&xv.data[(static_cast<std::size_t>(y / 2) * xv.width + xx / 2) * c], c,
                  &out.data[(static_cast<std::size_t>(y) * out.width + xx) * c]);
  return push(std::move(out), needs(x), [x, c](Graph& g, NodeId self) {
    const Tensor& up = g.upstream(self);
    Tensor& d = g.grad(x);
    for (int y = 0; y < up.height; ++y)
      for (int xx = 0; xx < up.width; ++xx) {
        double* dst = &d.data[(static_cast<std::size_t>(y / 2) * d.width + xx / 2) * c];
        const double* src = &up.data[(static_cast<std::size_t>(y) * up.width + xx) * c];
        for (int k = 0; k < c; ++k) dst[k] += src[k];
      }
  });
}

NodeId Graph::mse(NodeId a, NodeId b) {
  require_same_shape(value(a), value(b), "mse");
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av.data[i] - bv.data[i];
    acc += d * d;
  }
  const double n = static_cast<double>(av.size());
  Tensor out(1, 1, 1, acc / n);
  return push(std::move(out), needs(a) || needs(b), [a, b, n](Graph& g, NodeId self) {
    const double up = g.upstream(self).data[0];
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    const double k = 2.0 * up / n;
    if (g.needs(a)) {
      Tensor& d = g.grad(a);
      for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += k * (av.data[i] - bv.data[i]);
    }
    if (g.needs(b)) {
      Tensor& d = g.grad(b);
      for (std::size_t i = 0; i < d.size(); ++i) d.data[i] -= k * (av.data[i] - bv.data[i]);
    }
  });
}

NodeId Graph::dot(NodeId x, const Tensor& weights) {
  require_same_shape(value(x), weights, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += weights.data[i] * value(x).data[i];
  return push(Tensor(1, 1, 1, acc), needs(x), [x, weights](Graph& g, NodeId self) {
    const double up = g.upstream(self).data[0];
    Tensor& d = g.grad(x);
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += up * weights.data[i];
  });
}

void Graph::backward(NodeId root, std::span<double> grads) {
  if (value(root).size() != 1) throw ShapeError("backward root must be a scalar");
  if (params_ != nullptr && grads.size() != params_->count()) {
    throw ShapeError("gradient buffer does not match parameter count");
  }
  grad(root).data[0] += 1.0;
  for (NodeId id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param_index >= 0) {
      const auto& e = params_->entries()[static_cast<std::size_t>(n.param_index)];
      for (std::size_t i = 0; i < e.size; ++i) grads[e.offset + i] += n.grad.data[i];
    }
  }
}

}  // namespace facediff::nn
