#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "facediff/nn/graph.hpp"
#include "facediff/nn/params.hpp"

namespace facediff::nn {

inline constexpr int kDefaultTimeDim = 64;
inline constexpr double kLayerNormEps = 1e-6;
inline constexpr int kSqueezeRatio = 4;
inline constexpr int kFfnExpansion = 4;

/// Sinusoidal embedding of an integer step as a 1 x 1 x dim vector: the first
/// half holds sin(t * f_i), the second half cos(t * f_i), f_i = 10000^(-i / half).
Tensor time_embedding(int t, int dim = kDefaultTimeDim);

/// Number of GroupNorm groups used for a given channel count.
int norm_groups(int channels);

struct Conv {
  ParamHandle weight;
  ParamHandle bias;
  int kernel = 3;
  int stride = 1;

  static Conv create(ParamSet& ps, const std::string& prefix, int in_c, int out_c, int kernel,
                     int stride = 1, ParamInit weight_init = ParamInit::normal());
  NodeId forward(Graph& g, NodeId x) const;
};

struct Linear {
  ParamHandle weight;
  ParamHandle bias;

  static Linear create(ParamSet& ps, const std::string& prefix, int in_c, int out_c,
                       ParamInit weight_init = ParamInit::normal(),
                       ParamInit bias_init = ParamInit::zeros());
  NodeId forward(Graph& g, NodeId x) const;
};

/// Two-conv residual block with additive time conditioning.
///
///   h = conv1(silu(gn1(x))) + mlp(t_emb)
///   out = conv2(silu(gn2(h))) + skip(x)
///
/// skip is the identity when channel counts agree, otherwise a 1x1 projection.
struct ResBlock {
  int in_channels = 0;
  int out_channels = 0;
  ParamHandle norm1_gamma, norm1_beta;
  Conv conv1;
  Linear time_hidden;
  Linear time_out;
  ParamHandle norm2_gamma, norm2_beta;
  Conv conv2;
  std::optional<Conv> skip;

  static ResBlock create(ParamSet& ps, const std::string& prefix, int in_c, int out_c,
                         int time_dim = kDefaultTimeDim);
  NodeId forward(Graph& g, NodeId x, NodeId t_emb) const;
};

/// Per-location channel normalization with stabilizer kLayerNormEps, no affine.
NodeId layernorm2d(Graph& g, NodeId x);
Tensor layernorm2d(const Tensor& x);

/// Squeeze-excitation gate: global average pool, bottleneck MLP with ratio
/// kSqueezeRatio, logistic output. Returns one weight in (0, 1) per channel.
struct ChannelSqueeze {
  int channels = 0;
  Linear reduce;
  Linear expand;

  static ChannelSqueeze create(ParamSet& ps, const std::string& prefix, int channels,
                               int ratio = kSqueezeRatio);
  NodeId forward(Graph& g, NodeId x) const;
};

/// Position-wise two-layer network with GELU, expansion kFfnExpansion.
struct FeedForward {
  int channels = 0;
  Linear hidden;
  Linear out;

  static FeedForward create(ParamSet& ps, const std::string& prefix, int channels,
                            bool zero_output = false);
  NodeId forward(Graph& g, NodeId x) const;
};

/// A scalar loss of the parameters. When grads is non-empty it must be sized
/// like the parameter set and receives d(loss)/d(params) (accumulated).
using LossFn = std::function<double(const ParamSet& params, std::span<double> grads)>;

struct GradCheckOptions {
  int probe_count = 32;
  double step = 1e-5;
  std::uint64_t seed = 0;
};

/// Maximum relative error between the analytic gradient and central finite
/// differences over randomly chosen coordinates. The denominator is
/// max(|analytic|, |numeric|, 1e-8).
double grad_check(const LossFn& loss, ParamSet& params, const GradCheckOptions& options = {});

}  // namespace facediff::nn
