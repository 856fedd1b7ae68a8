#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "facediff/nn/params.hpp"
#include "facediff/tensor.hpp"

namespace facediff::nn {

using NodeId = std::size_t;

/// Single-use reverse-mode tape over Tensor values.
///
/// Every op evaluates eagerly and appends a node; nodes are therefore stored in
/// topological order and backward() is a reverse sweep. Parameter leaves copy
/// their values out of the bound ParamSet and scatter gradients back into a
/// flat vector laid out like ParamSet::flat().
class Graph {
 public:
  explicit Graph(const ParamSet* params = nullptr) : params_(params) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeId constant(Tensor value);
  NodeId param(ParamHandle h);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  std::size_t size() const { return nodes_.size(); }

  // Convolution over HWC input. Weights are laid out (k, k, c_in, c_out) and
  // padding is k / 2 (same padding for stride 1).
  NodeId conv2d(NodeId x, NodeId weight, NodeId bias, int kernel, int stride = 1);
  // Dense layer on a 1 x 1 x C vector; weight laid out (c_in, c_out).
  NodeId linear(NodeId x, NodeId weight, NodeId bias) { return conv2d(x, weight, bias, 1, 1); }

  NodeId add(NodeId a, NodeId b);
  NodeId add_channelwise(NodeId x, NodeId v);
  NodeId mul_channelwise(NodeId x, NodeId v);
  /// Multiplies every entry of x by the single entry of s.
  NodeId scale(NodeId x, NodeId s);
  NodeId mul_constant(NodeId x, double c);
  NodeId add_constant(NodeId x, double c);
  NodeId slice_channels(NodeId x, int offset, int count);
  NodeId concat_channels(NodeId a, NodeId b);

  NodeId silu(NodeId x);
  NodeId gelu(NodeId x);
  NodeId sigmoid(NodeId x);

  NodeId group_norm(NodeId x, NodeId gamma, NodeId beta, int groups, double eps = 1e-5);
  /// Normalizes over channels at each spatial location, no affine.
  NodeId layer_norm_channels(NodeId x, double eps);

  NodeId global_avg_pool(NodeId x);
  NodeId upsample_nearest2(NodeId x);

  /// Scalar mean((a - b)^2).
  NodeId mse(NodeId a, NodeId b);
  /// Scalar sum(weights * x).
  NodeId dot(NodeId x, const Tensor& weights);

  /// Propagates d(root)/d(.) and accumulates parameter gradients into grads,
  /// which must have ParamSet::count() entries.
  void backward(NodeId root, std::span<double> grads);

 private:
  using BackwardFn = std::function<void(Graph&, NodeId)>;

  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool needs_grad = false;
    std::ptrdiff_t param_index = -1;
  };

  NodeId push(Tensor value, bool needs_grad, BackwardFn fn);
  bool needs(NodeId id) const { return nodes_[id].needs_grad; }
  Tensor& grad(NodeId id);
  const Tensor& upstream(NodeId id) const { return nodes_[id].grad; }

  const ParamSet* params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, NodeId> param_nodes_;
};

}  // namespace facediff::nn
