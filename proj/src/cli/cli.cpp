#include "facediff/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "facediff/config.hpp"
#include "facediff/degrade.hpp"
#include "facediff/denoiser.hpp"
#include "facediff/errors.hpp"
#include "facediff/image_io.hpp"
#include "facediff/metrics.hpp"
#include "facediff/morphable3d.hpp"
#include "facediff/restore.hpp"
#include "facediff/rng.hpp"
#include "facediff/synth.hpp"

#ifndef FACEDIFF_VERSION
#define FACEDIFF_VERSION "0.0.0"
#endif

namespace facediff::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Bad invocation detected before anything is written.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Salts for per-file seed streams.
constexpr std::uint64_t kDegradeSalt = 0xd391;
constexpr std::uint64_t kNoiseSalt = 0x7015e;
constexpr std::uint64_t kRestoreSalt = 0x2e5;

std::uint64_t file_seed(std::uint64_t seed, std::uint64_t salt, const std::string& name) {
  return mix_seed(mix_seed(seed, salt), fnv1a64(name));
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void require_dir(const std::string& what, const std::string& path) {
  if (path.empty()) throw UsageError(what + " is required");
  if (!fs::is_directory(path)) throw UsageError(what + " is not a directory: " + path);
}

void require_file(const std::string& what, const std::string& path) {
  if (path.empty()) throw UsageError(what + " is required");
  if (!fs::is_regular_file(path)) throw UsageError(what + " not found: " + path);
}

// Output directory may exist but must not be a file.
void check_out_dir(const std::string& path) {
  if (fs::exists(path) && !fs::is_directory(path)) throw UsageError("output path is not a directory: " + path);
}

void write_metadata(const fs::path& dir, const std::string& command, const RunConfig& cfg, std::uint64_t seed,
                    json extra = json::object()) {
  json j;
  j["tool"] = "facediff";
  j["tool_version"] = FACEDIFF_VERSION;
  j["command"] = command;
  j["config_digest"] = hex64(cfg.digest());
  j["seed"] = seed;
  j["prior_model_version"] = kPriorModelVersion;
  j["quantization_tables"] = jpeg_tables_version();
  for (auto& [k, v] : extra.items()) j[k] = v;
  std::ofstream os(dir / "metadata.json");
  os << j.dump(2) << "\n";
  if (!os) throw IoError("cannot write " + (dir / "metadata.json").string());
}

// Holds the stage name reported when a runtime error escapes.
struct Stage {
  std::string name = "setup";
};

struct GlobalOpts {
  std::string config;
};

RunConfig base_config(const GlobalOpts& g) {
  if (g.config.empty()) return RunConfig{};
  if (!fs::is_regular_file(g.config)) throw UsageError("config file not found: " + g.config);
  try {
    return load_config(g.config);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

void validated(const RunConfig& cfg) {
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

std::optional<bool> ema_choice(bool ema, bool no_ema) {
  if (ema && no_ema) throw UsageError("--ema and --no-ema are mutually exclusive");
  if (ema) return true;
  if (no_ema) return false;
  return std::nullopt;
}

Tensor render_for(const FacePriorModel& model, const CoeffTable& table, const std::string& stem, int size) {
  const auto it = table.find(stem);
  if (it == table.end()) throw InvalidArgument("no 3DMM coefficients for '" + stem + "'");
  return render_mesh(model, split_coeffs(it->second), size, size).image;
}

// ---------------------------------------------------------------- degrade

struct DegradeOpts {
  std::string in, out;
  std::optional<std::uint64_t> seed;
};

int run_degrade(const GlobalOpts& g, const DegradeOpts& o, Stage& stage, std::ostream& out) {
  RunConfig cfg = base_config(g);
  if (o.seed) cfg.degrade.seed = *o.seed;
  validated(cfg);
  require_dir("input directory", o.in);
  check_out_dir(o.out);

  stage.name = "degrade";
  const auto files = list_pngs(o.in);
  if (files.empty()) throw IoError("no PNG files in " + o.in);
  fs::create_directories(o.out);
  std::vector<ManifestRow> rows;
  int clipped = 0;
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    const Tensor hq = read_png(f);
    const std::uint64_t s = file_seed(cfg.degrade.seed, kDegradeSalt, name);
    DegradationParams p = sample_degradation(s, cfg.degrade.ranges);
    // Small images cannot take the largest factors; keep at least 2 pixels.
    const double r_max = std::min(hq.height, hq.width) / 2.0;
    if (p.r_down > r_max) p.r_down = r_max, ++clipped;
    const std::uint64_t noise_seed = file_seed(cfg.degrade.seed, kNoiseSalt, name);
    write_png(fs::path(o.out) / name, degrade_pipeline(hq, p, noise_seed));
    rows.push_back({name, p, noise_seed});
  }
  write_manifest(fs::path(o.out) / "manifest.csv", rows);
  write_metadata(o.out, "degrade", cfg, cfg.degrade.seed,
                 {{"images", rows.size()}, {"r_clipped", clipped}, {"config", cfg.serialize()}});
  out << "degraded " << rows.size() << " images into " << o.out << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- render3d

struct RenderOpts {
  std::string coeffs, prior, out;
  std::optional<int> size;
};

int run_render3d(const GlobalOpts& g, const RenderOpts& o, Stage& stage, std::ostream& out) {
  RunConfig cfg = base_config(g);
  if (o.size) cfg.model.image_size = *o.size;
  require_file("coefficient file", o.coeffs);
  require_file("prior model", o.prior);
  check_out_dir(o.out);
  if (cfg.model.image_size < 8) throw UsageError("--size must be at least 8");

  stage.name = "load prior";
  const auto model = read_prior_model(o.prior);
  const auto table = read_coeff_file(o.coeffs);
  stage.name = "render";
  fs::create_directories(o.out);
  for (const auto& [stem, c] : table) {
    const auto r = render_mesh(model, split_coeffs(c), cfg.model.image_size, cfg.model.image_size);
    write_png(fs::path(o.out) / (stem + ".png"), r.image);
  }
  write_metadata(o.out, "render3d", cfg, 0, {{"images", table.size()}, {"size", cfg.model.image_size}});
  out << "rendered " << table.size() << " faces into " << o.out << "\n";
  return kExitOk;
}

// ------------------------------------------------------ make-prior, synth

struct PriorOpts {
  std::string out;
  int vertices = 1024;
  std::uint64_t seed = 0;
};

int run_make_prior(const GlobalOpts& g, const PriorOpts& o, Stage& stage, std::ostream& out) {
  const RunConfig cfg = base_config(g);
  check_out_dir(o.out);
  if (o.vertices < kMinPriorVertices) throw UsageError("--vertices must be at least " + std::to_string(kMinPriorVertices));
  stage.name = "make prior";
  fs::create_directories(o.out);
  write_prior_model(fs::path(o.out) / "prior_model.bin", synth_prior_model(o.seed, o.vertices));
  write_metadata(o.out, "make-prior", cfg, o.seed, {{"vertices", o.vertices}});
  out << "wrote " << (fs::path(o.out) / "prior_model.bin").string() << "\n";
  return kExitOk;
}

struct SynthOpts {
  std::string out;
  int count = 16;
  std::optional<int> size;
  int vertices = 1024;
  std::uint64_t seed = 0;
};

int run_synth(const GlobalOpts& g, const SynthOpts& o, Stage& stage, std::ostream& out) {
  RunConfig cfg = base_config(g);
  if (o.size) cfg.model.image_size = *o.size;
  check_out_dir(o.out);
  if (o.count < 1) throw UsageError("--count must be positive");
  if (cfg.model.image_size < 8) throw UsageError("--size must be at least 8");
  if (o.vertices < kMinPriorVertices) throw UsageError("--vertices must be at least " + std::to_string(kMinPriorVertices));

  stage.name = "synthesize";
  const fs::path dir(o.out);
  fs::create_directories(dir / "hq");
  const auto model = synth_prior_model(o.seed, o.vertices);
  write_prior_model(dir / "prior_model.bin", model);
  CoeffTable table;
  for (int i = 0; i < o.count; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "face_%03d", i);
    const std::uint64_t s = mix_seed(o.seed, static_cast<std::uint64_t>(i) + 1);
    const Coeff3DMM c = random_coeffs(s, model);
    write_png(dir / "hq" / (std::string(stem) + ".png"), synth_face_image(model, c, cfg.model.image_size, s));
    table[stem] = concat_coeffs(c);
  }
  write_coeff_file(dir / "coeffs.txt", table);
  write_metadata(dir, "synth", cfg, o.seed,
                 {{"images", o.count}, {"size", cfg.model.image_size}, {"vertices", o.vertices}});
  out << "synthesized " << o.count << " faces into " << o.out << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ train

struct TrainOpts {
  std::string out, data, coeffs, prior;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  bool ema = false, no_ema = false;
};

int run_train(const GlobalOpts& g, const TrainOpts& o, Stage& stage, std::ostream& out) {
  RunConfig cfg = base_config(g);
  if (o.steps) cfg.train.steps = *o.steps;
  if (o.seed) cfg.train.seed = *o.seed;
  if (!o.data.empty()) cfg.paths.data_dir = o.data;
  if (!o.coeffs.empty()) cfg.paths.coefficients = o.coeffs;
  if (!o.prior.empty()) cfg.paths.prior_model = o.prior;
  // EMA is always tracked; the flag only records which weights restore uses.
  if (auto e = ema_choice(o.ema, o.no_ema)) cfg.restore.use_ema = *e;
  validated(cfg);
  require_dir("training data directory", cfg.paths.data_dir);
  require_file("coefficient file", cfg.paths.coefficients);
  require_file("prior model", cfg.paths.prior_model);
  check_out_dir(o.out);

  stage.name = "load data";
  const auto model3d = read_prior_model(cfg.paths.prior_model);
  const auto table = read_coeff_file(cfg.paths.coefficients);
  const auto files = list_pngs(cfg.paths.data_dir);
  if (files.empty()) throw IoError("no PNG files in " + cfg.paths.data_dir);
  const int size = cfg.model.image_size;
  std::vector<TrainItem> data;
  for (const auto& f : files) {
    const Tensor img = read_png(f);
    if (img.height != size || img.width != size) {
      throw ShapeError(f.filename().string() + " is not " + std::to_string(size) + "x" + std::to_string(size));
    }
    data.push_back({to_model_space(img), render_for(model3d, table, f.stem().string(), size)});
  }

  stage.name = "train";
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const std::string text = cfg.serialize();
  const std::uint64_t digest = cfg.digest();
  const Denoiser model(cfg.denoiser());
  const auto sched = cfg.make_noise_schedule();
  const auto on_checkpoint = [&](const TrainState& st) {
    char name[40];
    std::snprintf(name, sizeof name, "checkpoint_%06" PRId64 ".ckpt", st.step);
    write_checkpoint(dir / name, st, digest, text);
  };
  const TrainState state = train_loop(data, model, sched, cfg.train_options(), on_checkpoint);

  stage.name = "write outputs";
  write_checkpoint(dir / "model.ckpt", state, digest, text);
  write_loss_csv(dir / "loss.csv", state.loss_history);
  const double last = state.loss_history.empty() ? 0.0 : state.loss_history.back();
  write_metadata(dir, "train", cfg, cfg.train.seed,
                 {{"images", data.size()},
                  {"steps", state.step},
                  {"parameters", model.param_count()},
                  {"final_loss", last},
                  {"config", text}});
  out << "trained " << state.step << " steps on " << data.size() << " images, final loss " << fmt("%.6g", last)
      << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- restore

struct RestoreOpts {
  std::string ckpt, lq, out, coeffs, prior, restorer, init_dir;
  std::optional<int> truncation;
  std::optional<std::uint64_t> seed;
  bool ema = false, no_ema = false;
};

std::unique_ptr<InitialRestorer> make_restorer(const RunConfig& cfg, const fs::path& lq_file) {
  const auto& kind = cfg.restore.restorer;
  if (kind == "identity") return std::make_unique<IdentityRestorer>();
  if (kind == "gaussian-denoise") return std::make_unique<GaussianDenoiseRestorer>(cfg.restore.denoise_sigma);
  return std::make_unique<ExternalFileRestorer>(fs::path(cfg.paths.init_dir) / lq_file.filename());
}

int run_restore(const GlobalOpts& g, const RestoreOpts& o, Stage& stage, std::ostream& out) {
  require_file("checkpoint", o.ckpt);
  require_dir("low-quality directory", o.lq);
  check_out_dir(o.out);

  stage.name = "load checkpoint";
  const Checkpoint ck = read_checkpoint(o.ckpt);
  if (fnv1a64(ck.config_text) != ck.config_digest) throw IoError("checkpoint config digest mismatch: " + o.ckpt);
  const RunConfig trained = parse_config(ck.config_text);

  stage.name = "setup";
  RunConfig cfg = g.config.empty() ? trained : base_config(g);
  // Architecture and schedule always follow the checkpoint.
  cfg.model = trained.model;
  cfg.schedule = trained.schedule;
  if (g.config.empty()) cfg.paths.init_dir.clear();
  if (o.truncation) cfg.restore.truncation = *o.truncation;
  if (o.seed) cfg.restore.seed = *o.seed;
  if (auto e = ema_choice(o.ema, o.no_ema)) cfg.restore.use_ema = *e;
  if (!o.restorer.empty()) cfg.restore.restorer = o.restorer;
  if (!o.init_dir.empty()) cfg.paths.init_dir = o.init_dir;
  if (!o.coeffs.empty()) cfg.paths.coefficients = o.coeffs;
  if (!o.prior.empty()) cfg.paths.prior_model = o.prior;
  validated(cfg);
  require_file("coefficient file", cfg.paths.coefficients);
  require_file("prior model", cfg.paths.prior_model);
  if (cfg.restore.restorer == "external-file") require_dir("initial restoration directory", cfg.paths.init_dir);

  stage.name = "load model";
  const Denoiser model(cfg.denoiser());
  nn::ParamSet params = model.initial_params();
  const auto& weights = cfg.restore.use_ema ? ck.ema : ck.params;
  if (weights.size() != params.count()) {
    throw ShapeError("checkpoint holds " + std::to_string(weights.size()) + " parameters, model needs " +
                     std::to_string(params.count()));
  }
  params.assign(std::vector<double>(weights.begin(), weights.end()));
  const auto sched = cfg.make_noise_schedule();
  const auto model3d = read_prior_model(cfg.paths.prior_model);
  const auto table = read_coeff_file(cfg.paths.coefficients);
  const auto files = list_pngs(o.lq);
  if (files.empty()) throw IoError("no PNG files in " + o.lq);

  const fs::path dir(o.out);
  fs::create_directories(dir / "gamma");
  const int size = cfg.model.image_size;
  std::string restorer_name;
  for (const auto& f : files) {
    const std::string name = f.filename().string(), stem = f.stem().string();
    stage.name = "initial restoration of " + name;
    const Tensor lq = read_png(f);
    if (lq.height != size || lq.width != size) {
      throw ShapeError(name + " is not " + std::to_string(size) + "x" + std::to_string(size));
    }
    const auto init = initial_restore(lq, *make_restorer(cfg, f));
    restorer_name = init.restorer;
    const Tensor x_3d = render_for(model3d, table, stem, size);
    stage.name = "diffusion restoration of " + name;
    const auto res = truncated_restore(init.image, x_3d, model, params, sched, cfg.restore.truncation,
                                       file_seed(cfg.restore.seed, kRestoreSalt, name));
    write_png(dir / name, res.image);
    write_gamma_logs(dir / "gamma" / stem, res.gamma);
  }
  stage.name = "write outputs";
  write_metadata(dir, "restore", cfg, cfg.restore.seed,
                 {{"images", files.size()},
                  {"checkpoint_digest", hex64(ck.config_digest)},
                  {"checkpoint_step", ck.step},
                  {"truncation", cfg.restore.truncation},
                  {"weights", cfg.restore.use_ema ? "ema" : "raw"},
                  {"restorer", restorer_name},
                  {"config", cfg.serialize()}});
  out << "restored " << files.size() << " images into " << o.out << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- eval

struct EvalOpts {
  std::string pred, gt, ref;
  std::vector<std::string> refs;
  std::string out;
  bool color = false;
};

std::vector<Tensor> load_all(const std::string& dir) {
  std::vector<Tensor> v;
  for (const auto& f : list_pngs(dir)) v.push_back(read_png(f));
  return v;
}

// Fréchet distance on pixels16 features, or NaN when either side has fewer
// than two images.
double fd_pixels16(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.size() < 2 || b.size() < 2) return std::nan("");
  return frechet_distance(feature_stats(a, FeatureExtractor::kPixels16), feature_stats(b, FeatureExtractor::kPixels16));
}

int run_eval(const GlobalOpts& g, const EvalOpts& o, Stage& stage, std::ostream& out) {
  const RunConfig cfg = base_config(g);
  require_dir("restored directory", o.pred);
  require_dir("ground-truth directory", o.gt);
  std::vector<std::string> refs = o.refs;
  if (!o.ref.empty()) refs.insert(refs.begin(), o.ref);
  for (const auto& r : refs) require_dir("reference directory", r);
  if (!o.out.empty()) check_out_dir(o.out);

  stage.name = "per-image metrics";
  const auto files = list_pngs(o.pred);
  if (files.empty()) throw IoError("no PNG files in " + o.pred);
  std::ostringstream rep;
  rep << (o.color ? "filename,psnr_rgb,ssim_gray\n" : "filename,psnr_gray,ssim_gray\n");
  std::vector<Tensor> pred, gt;
  double sum_p = 0.0, sum_s = 0.0;
  for (const auto& f : files) {
    const fs::path other = fs::path(o.gt) / f.filename();
    if (!fs::is_regular_file(other)) throw IoError("no ground truth for " + f.filename().string());
    pred.push_back(read_png(f));
    gt.push_back(read_png(other));
    const double p = o.color ? psnr(pred.back(), gt.back()) : psnr_gray(pred.back(), gt.back());
    const double s = ssim(pred.back(), gt.back());
    sum_p += p, sum_s += s;
    rep << f.filename().string() << "," << fmt("%.6f", p) << "," << fmt("%.6f", s) << "\n";
  }
  const double n = static_cast<double>(files.size());
  rep << "# mean," << fmt("%.6f", sum_p / n) << "," << fmt("%.6f", sum_s / n) << "\n";

  stage.name = "distribution metrics";
  rep << "# frechet_pixels16,ground_truth," << fmt("%.9g", fd_pixels16(pred, gt)) << "\n";
  for (const auto& r : refs) rep << "# frechet_pixels16,reference:" << r << "," << fmt("%.9g", fd_pixels16(pred, load_all(r))) << "\n";

  out << rep.str();
  if (!o.out.empty()) {
    stage.name = "write report";
    fs::create_directories(o.out);
    std::ofstream os(fs::path(o.out) / "report.csv");
    os << rep.str();
    if (!os) throw IoError("cannot write report in " + o.out);
    write_metadata(o.out, "eval", cfg, 0, {{"images", files.size()}, {"feature_extractor", "pixels16"}});
  }
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"3D-prior-guided diffusion for blind face restoration (desk scale)", "facediff"};
  app.require_subcommand(1);
  GlobalOpts global;
  app.add_option("--config", global.config, "INI run configuration");
  app.set_version_flag("--version", std::string(FACEDIFF_VERSION));

  DegradeOpts dg;
  auto* c_degrade = app.add_subcommand("degrade", "Degrade a directory of PNGs and write a manifest");
  c_degrade->add_option("input", dg.in, "HQ image directory")->required();
  c_degrade->add_option("output", dg.out, "output directory")->required();
  c_degrade->add_option("--seed", dg.seed, "degradation seed");

  RenderOpts rd;
  auto* c_render = app.add_subcommand("render3d", "Render faces from a coefficient file");
  c_render->add_option("coeffs", rd.coeffs, "coefficient file")->required();
  c_render->add_option("prior", rd.prior, "prior model file")->required();
  c_render->add_option("output", rd.out, "output directory")->required();
  c_render->add_option("--size", rd.size, "output size (default: model.image_size)");

  PriorOpts pm;
  auto* c_prior = app.add_subcommand("make-prior", "Write a synthetic prior model");
  c_prior->add_option("output", pm.out, "output directory")->required();
  c_prior->add_option("--vertices", pm.vertices, "vertex count")->capture_default_str();
  c_prior->add_option("--seed", pm.seed, "seed")->capture_default_str();

  SynthOpts sy;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic HQ face set with coefficients and prior model");
  c_synth->add_option("output", sy.out, "output directory")->required();
  c_synth->add_option("--count", sy.count, "number of images")->capture_default_str();
  c_synth->add_option("--size", sy.size, "image size (default: model.image_size)");
  c_synth->add_option("--vertices", sy.vertices, "prior model vertex count")->capture_default_str();
  c_synth->add_option("--seed", sy.seed, "seed")->capture_default_str();

  TrainOpts tr;
  auto* c_train = app.add_subcommand("train", "Train the denoiser");
  c_train->add_option("output", tr.out, "checkpoint directory")->required();
  c_train->add_option("--data", tr.data, "HQ image directory (paths.data_dir)");
  c_train->add_option("--coeffs", tr.coeffs, "coefficient file (paths.coefficients)");
  c_train->add_option("--prior", tr.prior, "prior model (paths.prior_model)");
  c_train->add_option("--steps", tr.steps, "training steps");
  c_train->add_option("--seed", tr.seed, "training seed");
  c_train->add_flag("--ema", tr.ema, "restore with EMA weights");
  c_train->add_flag("--no-ema", tr.no_ema, "restore with raw weights");

  RestoreOpts rs;
  auto* c_restore = app.add_subcommand("restore", "Restore a directory of LQ images");
  c_restore->add_option("checkpoint", rs.ckpt, "checkpoint file")->required();
  c_restore->add_option("input", rs.lq, "LQ image directory")->required();
  c_restore->add_option("output", rs.out, "output directory")->required();
  c_restore->add_option("--coeffs", rs.coeffs, "coefficient file (paths.coefficients)");
  c_restore->add_option("--prior", rs.prior, "prior model (paths.prior_model)");
  c_restore->add_option("--truncation", rs.truncation, "truncation step N");
  c_restore->add_option("--seed", rs.seed, "sampling seed");
  c_restore->add_option("--restorer", rs.restorer, "initial restorer")
      ->check(CLI::IsMember({"identity", "gaussian-denoise", "external-file"}));
  c_restore->add_option("--init-dir", rs.init_dir, "precomputed initial restorations (external-file)");
  c_restore->add_flag("--ema", rs.ema, "use EMA weights");
  c_restore->add_flag("--no-ema", rs.no_ema, "use raw weights");

  EvalOpts ev;
  auto* c_eval = app.add_subcommand("eval", "PSNR/SSIM per image and Frechet distances");
  c_eval->add_option("restored", ev.pred, "restored image directory")->required();
  c_eval->add_option("ground_truth", ev.gt, "ground-truth directory")->required();
  c_eval->add_option("reference", ev.ref, "clean reference corpus");
  c_eval->add_option("--ref", ev.refs, "clean reference corpus (repeatable)");
  c_eval->add_flag("--color", ev.color, "PSNR over RGB instead of luma");
  c_eval->add_option("--out", ev.out, "also write report.csv and metadata.json here");

  auto* c_self = app.add_subcommand("selftest", "Run the invariant suite");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << FACEDIFF_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "facediff: usage error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  Stage stage;
  std::string cmd = "facediff";
  try {
    if (c_degrade->parsed()) return cmd = "degrade", run_degrade(global, dg, stage, out);
    if (c_render->parsed()) return cmd = "render3d", run_render3d(global, rd, stage, out);
    if (c_prior->parsed()) return cmd = "make-prior", run_make_prior(global, pm, stage, out);
    if (c_synth->parsed()) return cmd = "synth", run_synth(global, sy, stage, out);
    if (c_train->parsed()) return cmd = "train", run_train(global, tr, stage, out);
    if (c_restore->parsed()) return cmd = "restore", run_restore(global, rs, stage, out);
    if (c_eval->parsed()) return cmd = "eval", run_eval(global, ev, stage, out);
    if (c_self->parsed()) {
      cmd = "selftest", stage.name = "selftest";
      return run_selftest(out) == 0 ? kExitOk : kExitRuntime;
    }
  } catch (const UsageError& e) {
    err << "facediff " << cmd << ": usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "facediff " << cmd << ": error during " << stage.name << ": " << e.what() << "\n";
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace facediff::cli
