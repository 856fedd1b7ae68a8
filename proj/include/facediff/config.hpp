#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "facediff/degrade.hpp"
#include "facediff/denoiser.hpp"

namespace facediff {

/// Resolved run configuration. Every key has a default; see
/// RunConfig::serialize() for the full list.
struct RunConfig {
  struct Schedule {
    int steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    bool operator==(const Schedule&) const = default;
  } schedule;

  struct Model {
    int image_size = 64;
    std::vector<int> widths{32, 64, 128, 128};
    int res_blocks = 1;
    int time_dim = 64;
    std::uint64_t seed = 0;
    bool operator==(const Model&) const = default;
  } model;

  struct Train {
    int steps = 2000;
    int batch_size = 4;
    double learning_rate = 1e-4;
    double ema_decay = 0.999;
    std::uint64_t seed = 0;
    int checkpoint_every = 500;
    bool operator==(const Train&) const = default;
  } train;

  struct Degrade {
    std::uint64_t seed = 0;
    DegradationRanges ranges;
    bool operator==(const Degrade&) const = default;
  } degrade;

  struct Restore {
    int truncation = 100;
    std::uint64_t seed = 0;
    bool use_ema = true;
    std::string restorer = "identity";  // identity | gaussian-denoise | external-file
    double denoise_sigma = 1.0;
    bool operator==(const Restore&) const = default;
  } restore;

  struct Paths {
    std::string data_dir;
    std::string coefficients;
    std::string prior_model;
    std::string init_dir;  // precomputed initial restorations (external-file)
    bool operator==(const Paths&) const = default;
  } paths;

  /// Canonical text form: every section and key, fixed order, exact values.
  std::string serialize() const;
  /// FNV-1a 64 of serialize().
  std::uint64_t digest() const;

  DenoiserConfig denoiser() const;
  NoiseSchedule make_noise_schedule() const;
  TrainOptions train_options() const;

  /// Throws InvalidArgument for values the pipeline cannot run with.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

/// Parses INI-style text ("[section]", "key = value", '#' or ';' comments)
/// on top of the defaults. Unknown sections or keys and malformed values are
/// InvalidArgument errors naming the line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace facediff
