#include "facediff/nn/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "facediff/errors.hpp"
#include "facediff/rng.hpp"

namespace facediff::nn {

Tensor time_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw InvalidArgument("time embedding dim must be even");
  const int half = dim / 2;
  Tensor emb(1, 1, dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
    const double arg = static_cast<double>(t) * freq;
    emb.data[i] = std::sin(arg);
    emb.data[half + i] = std::cos(arg);
  }
  return emb;
}

int norm_groups(int channels) {
  // Each group keeps at least 4 channels; a one-channel group would cancel the
  // per-channel time shift added right before the second norm.
  for (int g = 8; g > 1; --g) {
    if (channels % g == 0 && channels / g >= 4) return g;
  }
  return 1;
}

Conv Conv::create(ParamSet& ps, const std::string& prefix, int in_c, int out_c, int kernel,
                  int stride, ParamInit weight_init) {
  Conv c;
  c.weight = ps.add(prefix + ".w", {kernel, kernel, in_c, out_c}, weight_init);
  c.bias = ps.add(prefix + ".b", {out_c}, ParamInit::zeros());
  c.kernel = kernel;
  c.stride = stride;
  return c;
}

NodeId Conv::forward(Graph& g, NodeId x) const {
  return g.conv2d(x, g.param(weight), g.param(bias), kernel, stride);
}

Linear Linear::create(ParamSet& ps, const std::string& prefix, int in_c, int out_c,
                      ParamInit weight_init, ParamInit bias_init) {
  Linear l;
  l.weight = ps.add(prefix + ".w", {in_c, out_c}, weight_init);
  l.bias = ps.add(prefix + ".b", {out_c}, bias_init);
  return l;
}

NodeId Linear::forward(Graph& g, NodeId x) const {
  return g.linear(x, g.param(weight), g.param(bias));
}

ResBlock ResBlock::create(ParamSet& ps, const std::string& prefix, int in_c, int out_c,
                          int time_dim) {
  ResBlock r;
  r.in_channels = in_c;
  r.out_channels = out_c;
  r.norm1_gamma = ps.add(prefix + ".norm1.gamma", {in_c}, ParamInit::ones());
  r.norm1_beta = ps.add(prefix + ".norm1.beta", {in_c}, ParamInit::zeros());
  r.conv1 = Conv::create(ps, prefix + ".conv1", in_c, out_c, 3);
  r.time_hidden = Linear::create(ps, prefix + ".time1", time_dim, time_dim);
  r.time_out = Linear::create(ps, prefix + ".time2", time_dim, out_c);
  r.norm2_gamma = ps.add(prefix + ".norm2.gamma", {out_c}, ParamInit::ones());
  r.norm2_beta = ps.add(prefix + ".norm2.beta", {out_c}, ParamInit::zeros());
  r.conv2 = Conv::create(ps, prefix + ".conv2", out_c, out_c, 3);
  if (in_c != out_c) r.skip = Conv::create(ps, prefix + ".skip", in_c, out_c, 1);
  return r;
}

NodeId ResBlock::forward(Graph& g, NodeId x, NodeId t_emb) const {
  if (g.value(x).channels != in_channels) {
    throw ShapeError("ResBlock expects " + std::to_string(in_channels) + " channels, got " +
                     g.value(x).shape_string());
  }
  NodeId h = g.group_norm(x, g.param(norm1_gamma), g.param(norm1_beta), norm_groups(in_channels));
  h = conv1.forward(g, g.silu(h));
  const NodeId temb = time_out.forward(g, g.silu(time_hidden.forward(g, t_emb)));
  h = g.add_channelwise(h, temb);
  h = g.group_norm(h, g.param(norm2_gamma), g.param(norm2_beta), norm_groups(out_channels));
  h = conv2.forward(g, g.silu(h));
  const NodeId residual = skip ? skip->forward(g, x) : x;
  return g.add(h, residual);
}

NodeId layernorm2d(Graph& g, NodeId x) { return g.layer_norm_channels(x, kLayerNormEps); }

Tensor layernorm2d(const Tensor& x) {
  Graph g;
  return g.value(layernorm2d(g, g.constant(x)));
}

ChannelSqueeze ChannelSqueeze::create(ParamSet& ps, const std::string& prefix, int channels,
                                      int ratio) {
  ChannelSqueeze cs;
  cs.channels = channels;
  const int hidden = std::max(1, channels / ratio);
  cs.reduce = Linear::create(ps, prefix + ".reduce", channels, hidden);
  cs.expand = Linear::create(ps, prefix + ".expand", hidden, channels);
  return cs;
}

NodeId ChannelSqueeze::forward(Graph& g, NodeId x) const {
  if (g.value(x).channels != channels) throw ShapeError("ChannelSqueeze channel mismatch");
  const NodeId pooled = g.global_avg_pool(x);
  return g.sigmoid(expand.forward(g, g.silu(reduce.forward(g, pooled))));
}

FeedForward FeedForward::create(ParamSet& ps, const std::string& prefix, int channels,
                                bool zero_output) {
  FeedForward f;
  f.channels = channels;
  f.hidden = Linear::create(ps, prefix + ".fc1", channels, channels * kFfnExpansion);
  f.out = Linear::create(ps, prefix + ".fc2", channels * kFfnExpansion, channels,
                         zero_output ? ParamInit::zeros() : ParamInit::normal());
  return f;
}

NodeId FeedForward::forward(Graph& g, NodeId x) const {
  if (g.value(x).channels != channels) {
    throw ShapeError("FeedForward expects " + std::to_string(channels) + " channels, got " +
                     g.value(x).shape_string());
  }
  return out.forward(g, g.gelu(hidden.forward(g, x)));
}

double grad_check(const LossFn& loss, ParamSet& params, const GradCheckOptions& options) {
  const std::size_t n = params.count();
  if (n == 0) return 0.0;
  std::vector<double> analytic(n, 0.0);
  const double base = loss(params, analytic);
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss");

  Rng rng(options.seed);
  auto flat = params.flat();
  double worst = 0.0;
  const int probes = std::min<std::size_t>(options.probe_count, n) == n
                         ? static_cast<int>(n)
                         : options.probe_count;
  for (int p = 0; p < probes; ++p) {
    const std::size_t idx = probes == static_cast<int>(n)
                                ? static_cast<std::size_t>(p)
                                : static_cast<std::size_t>(rng.uniform_int(0, n - 1));
    const double saved = flat[idx];
    flat[idx] = saved + options.step;
    const double up = loss(params, {});
    flat[idx] = saved - options.step;
    const double down = loss(params, {});
    flat[idx] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: non-finite loss while probing");
    }
    const double numeric = (up - down) / (2.0 * options.step);
    const double denom = std::max({std::abs(analytic[idx]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[idx] - numeric) / denom);
  }
  return worst;
}

}  // namespace facediff::nn
