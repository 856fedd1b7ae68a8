#pragma once

#include <string>
#include <vector>

#include "facediff/nn/blocks.hpp"

namespace facediff {

/// One feature map per U-Net level, finest first.
using FeaturePyramid = std::vector<Tensor>;

/// Multi-level feature extractor over the rendered 3D prior.
///
/// Level 0 is ResBlock(x_3d); level i is ResBlock(stride-2 conv(level i-1)).
/// Every level is conditioned on the same time embedding, so the pyramid has
/// to be recomputed at each denoising step.
class GuidancePyramid {
 public:
  static GuidancePyramid create(nn::ParamSet& ps, const std::string& prefix,
                                const std::vector<int>& widths, int in_channels = 3,
                                int time_dim = nn::kDefaultTimeDim);

  int levels() const { return static_cast<int>(widths_.size()); }
  const std::vector<int>& widths() const { return widths_; }

  std::vector<nn::NodeId> forward(nn::Graph& g, nn::NodeId x_3d, nn::NodeId t_emb) const;

 private:
  std::vector<int> widths_;
  std::vector<nn::ResBlock> blocks_;
  std::vector<nn::Conv> downsamplers_;
};

/// Evaluates the pyramid on a [0, 1] render at the given time embedding.
FeaturePyramid extract_pyramid(const GuidancePyramid& pyramid, const nn::ParamSet& params,
                               const Tensor& x_3d, const Tensor& t_emb);

}  // namespace facediff
