#include "facediff/tafb.hpp"

#include "facediff/errors.hpp"

namespace facediff {

using nn::Graph;
using nn::NodeId;

NodeId sft_modulate(Graph& g, NodeId x_norm, NodeId alpha1, NodeId beta1) {
  const NodeId scaled = g.mul_channelwise(g.add_constant(x_norm, 1.0), alpha1);
  return g.add_channelwise(scaled, beta1);
}

Tensor sft_modulate(const Tensor& x_norm, std::span<const double> alpha1,
                    std::span<const double> beta1) {
  Graph g;
  const NodeId out = sft_modulate(g, g.constant(x_norm), g.constant(Tensor::vector(alpha1)),
                                  g.constant(Tensor::vector(beta1)));
  return g.value(out);
}

TimeAwareFusion TimeAwareFusion::create(nn::ParamSet& ps, const std::string& prefix, int channels,
                                        int time_dim) {
  TimeAwareFusion b;
  b.channels_ = channels;
  std::vector<double> bias(static_cast<std::size_t>(2 * channels + 3), 0.0);
  std::fill(bias.begin(), bias.begin() + channels, 1.0);
  bias[2 * channels] = 1.0;      // gamma1
  bias[2 * channels + 2] = 1.0;  // gamma3
  b.mlp_hidden_ = nn::Linear::create(ps, prefix + ".mlp1", time_dim, time_dim);
  b.mlp_out_ = nn::Linear::create(ps, prefix + ".mlp2", time_dim, 2 * channels + 3,
                                  nn::ParamInit::normal(), nn::ParamInit::explicit_values(bias));
  b.squeeze_prior_ = nn::ChannelSqueeze::create(ps, prefix + ".cs1", channels);
  b.squeeze_input_ = nn::ChannelSqueeze::create(ps, prefix + ".cs2", channels);
  b.fuse_ = nn::Conv::create(ps, prefix + ".fuse", 2 * channels, channels, 1, 1,
                             nn::ParamInit::zeros());
  b.ffn_ = nn::FeedForward::create(ps, prefix + ".ffn", channels, /*zero_output=*/true);
  return b;
}

NodeId TimeAwareFusion::time_weights(Graph& g, NodeId t_emb) const {
  return mlp_out_.forward(g, g.silu(mlp_hidden_.forward(g, t_emb)));
}

TimeWeights unpack_time_weights(std::span<const double> raw, int channels) {
  if (raw.size() != static_cast<std::size_t>(2 * channels + 3)) {
    throw ShapeError("time weight vector has wrong length");
  }
  TimeWeights w;
  w.alpha1.assign(raw.begin(), raw.begin() + channels);
  w.beta1.assign(raw.begin() + channels, raw.begin() + 2 * channels);
  w.gamma1 = raw[2 * channels];
  w.gamma2 = raw[2 * channels + 1];
  w.gamma3 = raw[2 * channels + 2];
  return w;
}

TimeWeights TimeAwareFusion::time_weights(const nn::ParamSet& params, const Tensor& t_emb) const {
  Graph g(&params);
  const NodeId raw = time_weights(g, g.constant(t_emb));
  return unpack_time_weights(g.value(raw).data, channels_);
}

NodeId TimeAwareFusion::forward(Graph& g, NodeId f_in, NodeId f_3d, NodeId t_emb,
                                NodeId* weights_out) const {
  const Tensor& in_v = g.value(f_in);
  if (!in_v.same_shape(g.value(f_3d)) || in_v.channels != channels_) {
    throw ShapeError("TAFB inputs " + in_v.shape_string() + " and " +
                     g.value(f_3d).shape_string() + " for " + std::to_string(channels_) +
                     " channels");
  }
  const int c = channels_;
  const NodeId raw = time_weights(g, t_emb);
  if (weights_out != nullptr) *weights_out = raw;
  const NodeId alpha1 = g.slice_channels(raw, 0, c);
  const NodeId beta1 = g.slice_channels(raw, c, c);
  const NodeId gamma1 = g.slice_channels(raw, 2 * c, 1);
  const NodeId gamma2 = g.slice_channels(raw, 2 * c + 1, 1);
  const NodeId gamma3 = g.slice_channels(raw, 2 * c + 2, 1);

  const NodeId f1 = sft_modulate(g, nn::layernorm2d(g, f_3d), alpha1, beta1);
  const NodeId f3 = g.mul_channelwise(f1, squeeze_prior_.forward(g, f1));
  const NodeId f4 = g.mul_channelwise(nn::layernorm2d(g, f_in), squeeze_input_.forward(g, f1));
  NodeId f5 = fuse_.forward(g, g.concat_channels(f3, f4));
  f5 = g.add(f5, g.scale(f_in, gamma1));
  f5 = g.add(f5, g.scale(f_3d, gamma2));
  return g.add(ffn_.forward(g, f5), g.scale(f5, gamma3));
}

Tensor tafb_forward(const TimeAwareFusion& block, const nn::ParamSet& params, const Tensor& f_in,
                    const Tensor& f_3d, const Tensor& t_emb) {
  Graph g(&params);
  const NodeId out = block.forward(g, g.constant(f_in), g.constant(f_3d), g.constant(t_emb));
  return g.value(out);
}

}  // namespace facediff
