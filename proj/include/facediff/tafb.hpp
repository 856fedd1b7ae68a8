#pragma once

#include <span>
#include <string>
#include <vector>

#include "facediff/nn/blocks.hpp"

namespace facediff {

/// Per-timestep mixing weights of one fusion block.
struct TimeWeights {
  std::vector<double> alpha1;  // SFT scale, one per channel
  std::vector<double> beta1;   // SFT shift, one per channel
  double gamma1 = 0.0;         // weight of the noisy-image features
  double gamma2 = 0.0;         // weight of the 3D-prior features
  double gamma3 = 0.0;         // FFN gate residual weight
};

/// SFT modulation alpha1 * (1 + x) + beta1 with per-channel alpha1/beta1
/// broadcast over space.
nn::NodeId sft_modulate(nn::Graph& g, nn::NodeId x_norm, nn::NodeId alpha1, nn::NodeId beta1);
Tensor sft_modulate(const Tensor& x_norm, std::span<const double> alpha1,
                    std::span<const double> beta1);

/// Time-aware fusion of noisy-image features with 3D-prior features.
///
///   F1 = SFT(LN(F3d), a1, b1)
///   F3 = CS1(F1) * F1
///   F4 = CS2(F1) * LN(Fin)
///   F5 = Conv1x1([F3, F4]) + g1 * Fin + g2 * F3d
///   out = FFN(F5) + g3 * F5
///
/// (a1, b1, g1, g2, g3) come from one MLP of the time embedding. The 1x1 conv
/// and the FFN output layer start at zero so a fresh block computes
/// g3 * (g1 * Fin + g2 * F3d); the MLP bias starts at a1 = 1, b1 = 0,
/// g1 = 1, g2 = 0, g3 = 1.
class TimeAwareFusion {
 public:
  static TimeAwareFusion create(nn::ParamSet& ps, const std::string& prefix, int channels,
                                int time_dim = nn::kDefaultTimeDim);

  int channels() const { return channels_; }

  /// Raw (2C + 3)-vector node laid out (alpha1, beta1, gamma1, gamma2, gamma3).
  nn::NodeId time_weights(nn::Graph& g, nn::NodeId t_emb) const;
  TimeWeights time_weights(const nn::ParamSet& params, const Tensor& t_emb) const;

  /// weights_out, when given, receives the node produced by time_weights().
  nn::NodeId forward(nn::Graph& g, nn::NodeId f_in, nn::NodeId f_3d, nn::NodeId t_emb,
                     nn::NodeId* weights_out = nullptr) const;

  const nn::Linear& mlp_hidden() const { return mlp_hidden_; }
  const nn::Linear& mlp_out() const { return mlp_out_; }
  const nn::Conv& fuse() const { return fuse_; }
  const nn::FeedForward& ffn() const { return ffn_; }

 private:
  int channels_ = 0;
  nn::Linear mlp_hidden_;
  nn::Linear mlp_out_;
  nn::ChannelSqueeze squeeze_prior_;
  nn::ChannelSqueeze squeeze_input_;
  nn::Conv fuse_;
  nn::FeedForward ffn_;
};

/// Splits a raw (2C + 3)-vector into TimeWeights.
TimeWeights unpack_time_weights(std::span<const double> raw, int channels);

/// Convenience: evaluates a fusion block on tensors at timestep t.
Tensor tafb_forward(const TimeAwareFusion& block, const nn::ParamSet& params, const Tensor& f_in,
                    const Tensor& f_3d, const Tensor& t_emb);

}  // namespace facediff
