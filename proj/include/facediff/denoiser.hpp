#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "facediff/guidance.hpp"
#include "facediff/nn/blocks.hpp"
#include "facediff/schedule.hpp"
#include "facediff/tafb.hpp"

namespace facediff {

struct DenoiserConfig {
  int image_size = 64;
  std::vector<int> widths{32, 64, 128, 128};
  int res_blocks = 1;
  int time_dim = nn::kDefaultTimeDim;
  std::uint64_t seed = 0;

  int levels() const { return static_cast<int>(widths.size()); }
  /// Throws InvalidArgument when the configuration cannot be built.
  void validate() const;
};

/// Output of one noise prediction, with the per-level fusion weights that the
/// restore telemetry logs.
struct NoisePrediction {
  nn::NodeId eps;
  std::vector<nn::NodeId> time_weights;  // one raw (2C + 3)-vector per level
};

/// Conditional epsilon-prediction U-Net with a guidance pyramid and one
/// time-aware fusion block per encoder level.
///
/// Encoder level i: ResBlock(s) -> TAFB(pyramid level i) -> skip -> stride-2
/// conv (except the last level). A bottleneck ResBlock follows. Decoder level
/// i: nearest upsample + 3x3 conv (except the last level), concat skip,
/// ResBlock(s). The head is silu -> zero-initialized 3x3 conv to 3 channels.
class Denoiser {
 public:
  explicit Denoiser(DenoiserConfig config);

  const DenoiserConfig& config() const { return config_; }
  const GuidancePyramid& pyramid() const { return pyramid_; }
  const std::vector<TimeAwareFusion>& fusion_blocks() const { return fusion_; }

  /// Parameter set with the declared layout, initialized from config().seed.
  nn::ParamSet initial_params() const;
  std::size_t param_count() const { return layout_.count(); }

  std::vector<nn::NodeId> guidance(nn::Graph& g, nn::NodeId x_3d, nn::NodeId t_emb) const;
  NoisePrediction forward(nn::Graph& g, nn::NodeId x_t, const std::vector<nn::NodeId>& pyramid,
                          nn::NodeId t_emb) const;

 private:
  DenoiserConfig config_;
  nn::ParamSet layout_;
  GuidancePyramid pyramid_;
  std::vector<std::vector<nn::ResBlock>> encoder_;
  std::vector<TimeAwareFusion> fusion_;
  std::vector<nn::Conv> downsamplers_;
  nn::ResBlock bottleneck_;
  std::vector<nn::Conv> upsamplers_;  // upsamplers_[i] feeds decoder level i
  std::vector<std::vector<nn::ResBlock>> decoder_;
  nn::Conv head_;
};

/// eps_hat for x_t given precomputed guidance features.
LatentImage predict_noise(const Denoiser& model, const nn::ParamSet& params, const LatentImage& x_t,
                          const FeaturePyramid& pyramid, const Tensor& t_emb);

/// Mean squared error between eps and the prediction at q_sample(x0, t, eps).
/// x_3d is the [0, 1] prior render. When grads is non-empty the parameter
/// gradient of the loss (times grad_scale) is accumulated into it.
double diffusion_loss(const Denoiser& model, const nn::ParamSet& params, const LatentImage& x0,
                      const Tensor& x_3d, int t, const LatentImage& eps,
                      const NoiseSchedule& sched, std::span<double> grads = {},
                      double grad_scale = 1.0);

struct TrainItem {
  LatentImage x0;  // model space [-1, 1]
  Tensor x_3d;     // [0, 1]
};

struct TrainOptions {
  int steps = 0;
  int batch_size = 4;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double ema_decay = 0.999;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0 disables the callback
};

struct TrainState {
  nn::ParamSet params;
  std::vector<double> ema;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::int64_t step = 0;
  std::vector<double> loss_history;
};

TrainState initial_train_state(const Denoiser& model);

/// One Adam update from an averaged gradient, followed by the EMA update.
void apply_update(TrainState& state, std::span<const double> grads, const TrainOptions& opts);

using CheckpointFn = std::function<void(const TrainState&)>;

/// Runs opts.steps Adam updates from the model's initialization. Items are
/// drawn in per-epoch shuffled order; each draw gets t ~ U{1..T} and fresh eps.
TrainState train_loop(const std::vector<TrainItem>& dataset, const Denoiser& model,
                      const NoiseSchedule& sched, const TrainOptions& opts,
                      const CheckpointFn& on_checkpoint = {});

// Checkpoint: "FDCKPT01" magic, u32 version, u32 reserved, u64 config digest,
// i64 step, u64 parameter count, u64 config text length, config text, then
// little-endian float32 params, EMA, Adam m, Adam v.
struct Checkpoint {
  std::uint64_t config_digest = 0;
  std::string config_text;
  std::int64_t step = 0;
  std::vector<float> params;
  std::vector<float> ema;
  std::vector<float> adam_m;
  std::vector<float> adam_v;
};

void write_checkpoint(const std::filesystem::path& path, const TrainState& state,
                      std::uint64_t config_digest, const std::string& config_text);
Checkpoint read_checkpoint(const std::filesystem::path& path);
void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses);

}  // namespace facediff
