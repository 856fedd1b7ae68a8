#include "facediff/guidance.hpp"

#include "facediff/errors.hpp"

namespace facediff {

GuidancePyramid GuidancePyramid::create(nn::ParamSet& ps, const std::string& prefix,
                                        const std::vector<int>& widths, int in_channels,
                                        int time_dim) {
  if (widths.empty()) throw InvalidArgument("guidance pyramid needs at least one level");
  GuidancePyramid p;
  p.widths_ = widths;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string level = prefix + ".level" + std::to_string(i);
    int block_in = in_channels;
    if (i > 0) {
      p.downsamplers_.push_back(
          nn::Conv::create(ps, level + ".down", widths[i - 1], widths[i - 1], 3, 2));
      block_in = widths[i - 1];
    }
    p.blocks_.push_back(nn::ResBlock::create(ps, level + ".res", block_in, widths[i], time_dim));
  }
  return p;
}

std::vector<nn::NodeId> GuidancePyramid::forward(nn::Graph& g, nn::NodeId x_3d,
                                                 nn::NodeId t_emb) const {
  const Tensor& x = g.value(x_3d);
  const int factor = 1 << (levels() - 1);
  if (x.height % factor != 0 || x.width % factor != 0) {
    throw ShapeError("prior render " + x.shape_string() + " not divisible by " +
                     std::to_string(factor));
  }
  std::vector<nn::NodeId> out;
  out.reserve(blocks_.size());
  nn::NodeId h = x_3d;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (i > 0) h = downsamplers_[i - 1].forward(g, h);
    h = blocks_[i].forward(g, h, t_emb);
    out.push_back(h);
  }
  return out;
}

FeaturePyramid extract_pyramid(const GuidancePyramid& pyramid, const nn::ParamSet& params,
                               const Tensor& x_3d, const Tensor& t_emb) {
  nn::Graph g(&params);
  const auto nodes = pyramid.forward(g, g.constant(x_3d), g.constant(t_emb));
  FeaturePyramid levels;
  levels.reserve(nodes.size());
  for (auto id : nodes) levels.push_back(g.value(id));
  return levels;
}

}  // namespace facediff
