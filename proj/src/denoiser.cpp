#include "facediff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"
#include "facediff/errors.hpp"
#include "facediff/rng.hpp"

namespace facediff {

using nn::Graph;
using nn::NodeId;

void DenoiserConfig::validate() const {
  if (widths.empty()) throw InvalidArgument("denoiser needs at least one level");
  for (int w : widths) {
    if (w < 1) throw InvalidArgument("level widths must be positive");
  }
  if (res_blocks < 1) throw InvalidArgument("res_blocks must be >= 1");
  if (time_dim < 2 || time_dim % 2 != 0) throw InvalidArgument("time_dim must be even");
  const int factor = 1 << (levels() - 1);
  if (image_size < 1 || image_size % factor != 0) {
    throw InvalidArgument("image_size " + std::to_string(image_size) + " not divisible by " +
                          std::to_string(factor));
  }
}

Denoiser::Denoiser(DenoiserConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& ch = config_.widths;
  const int levels = config_.levels();
  const int td = config_.time_dim;
  pyramid_ = GuidancePyramid::create(layout_, "pyramid", ch, 3, td);

  int prev = 3;
  for (int i = 0; i < levels; ++i) {
    const std::string p = "enc" + std::to_string(i);
    std::vector<nn::ResBlock> blocks;
    for (int r = 0; r < config_.res_blocks; ++r) {
      blocks.push_back(nn::ResBlock::create(layout_, p + ".res" + std::to_string(r),
                                            r == 0 ? prev : ch[i], ch[i], td));
    }
    encoder_.push_back(std::move(blocks));
    fusion_.push_back(TimeAwareFusion::create(layout_, p + ".tafb", ch[i], td));
    if (i + 1 < levels) {
      downsamplers_.push_back(nn::Conv::create(layout_, p + ".down", ch[i], ch[i], 3, 2));
    }
    prev = ch[i];
  }
  bottleneck_ = nn::ResBlock::create(layout_, "mid", ch.back(), ch.back(), td);

  upsamplers_.resize(static_cast<std::size_t>(levels));
  decoder_.resize(static_cast<std::size_t>(levels));
  int carried = ch.back();
  for (int i = levels - 1; i >= 0; --i) {
    const std::string p = "dec" + std::to_string(i);
    if (i + 1 < levels) {
      upsamplers_[i] = nn::Conv::create(layout_, p + ".up", carried, carried, 3);
    }
    for (int r = 0; r < config_.res_blocks; ++r) {
      decoder_[i].push_back(nn::ResBlock::create(layout_, p + ".res" + std::to_string(r),
                                                 r == 0 ? carried + ch[i] : ch[i], ch[i], td));
    }
    carried = ch[i];
  }
  head_ = nn::Conv::create(layout_, "head", ch.front(), 3, 3, 1, nn::ParamInit::zeros());
}

nn::ParamSet Denoiser::initial_params() const {
  nn::ParamSet ps = layout_;
  ps.initialize(config_.seed);
  return ps;
}

std::vector<NodeId> Denoiser::guidance(Graph& g, NodeId x_3d, NodeId t_emb) const {
  return pyramid_.forward(g, x_3d, t_emb);
}

NoisePrediction Denoiser::forward(Graph& g, NodeId x_t, const std::vector<NodeId>& pyramid,
                                  NodeId t_emb) const {
  const Tensor& xv = g.value(x_t);
  if (xv.height != config_.image_size || xv.width != config_.image_size || xv.channels != 3) {
    throw ShapeError("denoiser expects (" + std::to_string(config_.image_size) + "," +
                     std::to_string(config_.image_size) + ",3) input, got " + xv.shape_string());
  }
  const int levels = config_.levels();
  if (static_cast<int>(pyramid.size()) != levels) {
    throw ShapeError("guidance pyramid has " + std::to_string(pyramid.size()) + " levels, need " +
                     std::to_string(levels));
  }

  NoisePrediction out;
  std::vector<NodeId> skips;
  NodeId h = x_t;
  for (int i = 0; i < levels; ++i) {
    for (const auto& block : encoder_[i]) h = block.forward(g, h, t_emb);
    NodeId weights = 0;
    h = fusion_[i].forward(g, h, pyramid[i], t_emb, &weights);
    out.time_weights.push_back(weights);
    skips.push_back(h);
    if (i + 1 < levels) h = downsamplers_[i].forward(g, h);
  }
  h = bottleneck_.forward(g, h, t_emb);
  for (int i = levels - 1; i >= 0; --i) {
    if (i + 1 < levels) h = upsamplers_[i].forward(g, g.upsample_nearest2(h));
    h = g.concat_channels(h, skips[i]);
    for (const auto& block : decoder_[i]) h = block.forward(g, h, t_emb);
  }
  out.eps = head_.forward(g, g.silu(h));
  return out;
}

LatentImage predict_noise(const Denoiser& model, const nn::ParamSet& params, const LatentImage& x_t,
                          const FeaturePyramid& pyramid, const Tensor& t_emb) {
  if (params.count() != model.param_count()) throw ShapeError("parameter layout mismatch");
  Graph g(&params);
  std::vector<NodeId> levels;
  for (const auto& level : pyramid) levels.push_back(g.constant(level));
  const auto pred = model.forward(g, g.constant(x_t), levels, g.constant(t_emb));
  return g.value(pred.eps);
}

namespace {

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

double diffusion_loss(const Denoiser& model, const nn::ParamSet& params, const LatentImage& x0,
                      const Tensor& x_3d, int t, const LatentImage& eps,
                      const NoiseSchedule& sched, std::span<double> grads, double grad_scale) {
  if (params.count() != model.param_count()) throw ShapeError("parameter layout mismatch");
  const LatentImage x_t = q_sample(x0, t, eps, sched);
  Graph g(&params);
  const NodeId temb = g.constant(nn::time_embedding(t, model.config().time_dim));
  const auto pyramid = model.guidance(g, g.constant(x_3d), temb);
  const auto pred = model.forward(g, g.constant(x_t), pyramid, temb);
  NodeId loss = g.mse(pred.eps, g.constant(eps));
  const double value = g.value(loss).data[0];
  if (!std::isfinite(value)) {
    throw NumericError("non-finite diffusion loss at t=" + std::to_string(t) +
                       ", parameter norm " + std::to_string(l2_norm(params.flat())));
  }
  if (!grads.empty()) {
    if (grad_scale != 1.0) loss = g.mul_constant(loss, grad_scale);
    g.backward(loss, grads);
  }
  return value;
}

TrainState initial_train_state(const Denoiser& model) {
  TrainState s{model.initial_params(), {}, {}, {}, 0, {}};
  const auto flat = s.params.flat();
  s.ema.assign(flat.begin(), flat.end());
  s.adam_m.assign(flat.size(), 0.0);
  s.adam_v.assign(flat.size(), 0.0);
  return s;
}

void apply_update(TrainState& state, std::span<const double> grads, const TrainOptions& opts) {
  auto p = state.params.flat();
  if (grads.size() != p.size()) throw ShapeError("gradient size mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(opts.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opts.adam_beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    double& m = state.adam_m[i];
    double& v = state.adam_v[i];
    m = opts.adam_beta1 * m + (1.0 - opts.adam_beta1) * grads[i];
    v = opts.adam_beta2 * v + (1.0 - opts.adam_beta2) * grads[i] * grads[i];
    p[i] -= opts.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + opts.adam_eps);
  }
  const double d = opts.ema_decay;
  for (std::size_t i = 0; i < p.size(); ++i) state.ema[i] = d * state.ema[i] + (1.0 - d) * p[i];
}

TrainState train_loop(const std::vector<TrainItem>& dataset, const Denoiser& model,
                      const NoiseSchedule& sched, const TrainOptions& opts,
                      const CheckpointFn& on_checkpoint) {
  if (dataset.empty()) throw InvalidArgument("training dataset is empty");
  if (opts.batch_size < 1) throw InvalidArgument("batch size must be positive");
  if (opts.steps < 0) throw InvalidArgument("step count must be non-negative");
  const int size = model.config().image_size;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& item = dataset[i];
    if (item.x0.height != size || item.x0.width != size || item.x0.channels != 3 ||
        !item.x0.same_shape(item.x_3d)) {
      throw InvalidArgument("training item " + std::to_string(i) + " has shape " +
                            item.x0.shape_string() + " / " + item.x_3d.shape_string() +
                            ", expected (" + std::to_string(size) + "," + std::to_string(size) +
                            ",3)");
    }
  }

  TrainState state = initial_train_state(model);
  Rng rng(opts.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  std::vector<double> grads(state.params.count());
  const double scale = 1.0 / opts.batch_size;

  for (int step = 0; step < opts.steps; ++step) {
    std::fill(grads.begin(), grads.end(), 0.0);
    double batch_loss = 0.0;
    for (int b = 0; b < opts.batch_size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) {
          std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, i - 1))]);
        }
        cursor = 0;
      }
      const auto& item = dataset[order[cursor++]];
      const int t = static_cast<int>(rng.uniform_int(1, sched.steps()));
      const Tensor eps = rng.normal_tensor(size, size, 3);
      batch_loss += diffusion_loss(model, state.params, item.x0, item.x_3d, t, eps, sched, grads,
                                   scale);
    }
    apply_update(state, grads, opts);
    state.loss_history.push_back(batch_loss * scale);
    if (on_checkpoint && opts.checkpoint_every > 0 && state.step % opts.checkpoint_every == 0) {
      on_checkpoint(state);
    }
  }
  return state;
}

namespace {

constexpr char kCheckpointMagic[8] = {'F', 'D', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const TrainState& state,
                      std::uint64_t config_digest, const std::string& config_text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod<std::uint32_t>(os, kCheckpointVersion);
  detail::write_pod<std::uint32_t>(os, 0);
  detail::write_pod<std::uint64_t>(os, config_digest);
  detail::write_pod<std::int64_t>(os, state.step);
  detail::write_pod<std::uint64_t>(os, state.params.count());
  detail::write_pod<std::uint64_t>(os, config_text.size());
  os.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  detail::write_floats(os, state.params.flat());
  detail::write_floats(os, state.ema);
  detail::write_floats(os, state.adam_m);
  detail::write_floats(os, state.adam_v);
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(magic, magic + 8, kCheckpointMagic)) {
    throw IoError(path.string() + " is not a checkpoint");
  }
  if (detail::read_pod<std::uint32_t>(is) != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version in " + path.string());
  }
  detail::read_pod<std::uint32_t>(is);
  Checkpoint ck;
  ck.config_digest = detail::read_pod<std::uint64_t>(is);
  ck.step = detail::read_pod<std::int64_t>(is);
  const auto count = detail::read_pod<std::uint64_t>(is);
  const auto text_len = detail::read_pod<std::uint64_t>(is);
  ck.config_text.resize(text_len);
  is.read(ck.config_text.data(), static_cast<std::streamsize>(text_len));
  if (!is) throw IoError("truncated checkpoint " + path.string());
  ck.params = detail::read_array<float>(is, count);
  ck.ema = detail::read_array<float>(is, count);
  ck.adam_m = detail::read_array<float>(is, count);
  ck.adam_v = detail::read_array<float>(is, count);
  return ck;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "step,loss\n";
  os.precision(17);
  for (std::size_t i = 0; i < losses.size(); ++i) os << (i + 1) << ',' << losses[i] << '\n';
}

}  // namespace facediff
