#include "facediff/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "facediff/errors.hpp"

namespace facediff {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw InvalidArgument("expected an integer, got '" + std::string(v) + "'");
  return out;
}

double parse_double(std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(out)) {
    throw InvalidArgument("expected a number, got '" + s + "'");
  }
  return out;
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidArgument("expected true or false, got '" + std::string(v) + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Key {
  std::string section;
  std::string name;
  std::function<std::string(RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename Access>
Key int_key(std::string section, std::string name, Access f) {
  return {std::move(section), std::move(name), [f](RunConfig& c) { return std::to_string(f(c)); },
          [f](RunConfig& c, std::string_view v) { f(c) = parse_integer<std::remove_reference_t<decltype(f(c))>>(v); }};
}

template <typename Access>
Key double_key(std::string section, std::string name, Access f) {
  return {std::move(section), std::move(name), [f](RunConfig& c) { return format_double(f(c)); },
          [f](RunConfig& c, std::string_view v) { f(c) = parse_double(v); }};
}

template <typename Access>
Key bool_key(std::string section, std::string name, Access f) {
  return {std::move(section), std::move(name), [f](RunConfig& c) { return std::string(f(c) ? "true" : "false"); },
          [f](RunConfig& c, std::string_view v) { f(c) = parse_bool(v); }};
}

template <typename Access>
Key string_key(std::string section, std::string name, Access f) {
  return {std::move(section), std::move(name), [f](RunConfig& c) { return f(c); },
          [f](RunConfig& c, std::string_view v) { f(c) = std::string(v); }};
}

Key widths_key() {
  auto get = [](RunConfig& c) {
    std::string out;
    for (std::size_t i = 0; i < c.model.widths.size(); ++i) out += (i ? "," : "") + std::to_string(c.model.widths[i]);
    return out;
  };
  auto set = [](RunConfig& c, std::string_view v) {
    std::vector<int> w;
    while (!v.empty()) {
      const auto comma = v.find(',');
      w.push_back(parse_integer<int>(trim(v.substr(0, comma))));
      if (comma == std::string_view::npos) break;
      v.remove_prefix(comma + 1);
    }
    c.model.widths = std::move(w);
  };
  return {"model", "widths", get, set};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      int_key("schedule", "steps", [](RunConfig& c) -> int& { return c.schedule.steps; }),
      double_key("schedule", "beta_start", [](RunConfig& c) -> double& { return c.schedule.beta_start; }),
      double_key("schedule", "beta_end", [](RunConfig& c) -> double& { return c.schedule.beta_end; }),
      int_key("model", "image_size", [](RunConfig& c) -> int& { return c.model.image_size; }),
      widths_key(),
      int_key("model", "res_blocks", [](RunConfig& c) -> int& { return c.model.res_blocks; }),
      int_key("model", "time_dim", [](RunConfig& c) -> int& { return c.model.time_dim; }),
      int_key("model", "seed", [](RunConfig& c) -> std::uint64_t& { return c.model.seed; }),
      int_key("train", "steps", [](RunConfig& c) -> int& { return c.train.steps; }),
      int_key("train", "batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; }),
      double_key("train", "learning_rate", [](RunConfig& c) -> double& { return c.train.learning_rate; }),
      double_key("train", "ema_decay", [](RunConfig& c) -> double& { return c.train.ema_decay; }),
      int_key("train", "seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }),
      int_key("train", "checkpoint_every", [](RunConfig& c) -> int& { return c.train.checkpoint_every; }),
      int_key("degrade", "seed", [](RunConfig& c) -> std::uint64_t& { return c.degrade.seed; }),
      double_key("degrade", "sigma_min", [](RunConfig& c) -> double& { return c.degrade.ranges.sigma_lo; }),
      double_key("degrade", "sigma_max", [](RunConfig& c) -> double& { return c.degrade.ranges.sigma_hi; }),
      double_key("degrade", "r_min", [](RunConfig& c) -> double& { return c.degrade.ranges.r_lo; }),
      double_key("degrade", "r_max", [](RunConfig& c) -> double& { return c.degrade.ranges.r_hi; }),
      double_key("degrade", "delta_min", [](RunConfig& c) -> double& { return c.degrade.ranges.delta_lo; }),
      double_key("degrade", "delta_max", [](RunConfig& c) -> double& { return c.degrade.ranges.delta_hi; }),
      int_key("degrade", "q_min", [](RunConfig& c) -> int& { return c.degrade.ranges.q_lo; }),
      int_key("degrade", "q_max", [](RunConfig& c) -> int& { return c.degrade.ranges.q_hi; }),
      int_key("restore", "truncation", [](RunConfig& c) -> int& { return c.restore.truncation; }),
      int_key("restore", "seed", [](RunConfig& c) -> std::uint64_t& { return c.restore.seed; }),
      bool_key("restore", "use_ema", [](RunConfig& c) -> bool& { return c.restore.use_ema; }),
      string_key("restore", "restorer", [](RunConfig& c) -> std::string& { return c.restore.restorer; }),
      double_key("restore", "denoise_sigma", [](RunConfig& c) -> double& { return c.restore.denoise_sigma; }),
      string_key("paths", "data_dir", [](RunConfig& c) -> std::string& { return c.paths.data_dir; }),
      string_key("paths", "coefficients", [](RunConfig& c) -> std::string& { return c.paths.coefficients; }),
      string_key("paths", "prior_model", [](RunConfig& c) -> std::string& { return c.paths.prior_model; }),
      string_key("paths", "init_dir", [](RunConfig& c) -> std::string& { return c.paths.init_dir; }),
  };
  return k;
}

}  // namespace

std::string RunConfig::serialize() const {
  RunConfig copy = *this;
  std::string out, section;
  for (const auto& k : keys()) {
    if (k.section != section) {
      if (!section.empty()) out += "\n";
      section = k.section;
      out += "[" + section + "]\n";
    }
    out += k.name + " = " + k.get(copy) + "\n";
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t RunConfig::digest() const { return fnv1a64(serialize()); }

DenoiserConfig RunConfig::denoiser() const {
  DenoiserConfig d;
  d.image_size = model.image_size;
  d.widths = model.widths;
  d.res_blocks = model.res_blocks;
  d.time_dim = model.time_dim;
  d.seed = model.seed;
  return d;
}

NoiseSchedule RunConfig::make_noise_schedule() const {
  return make_schedule(schedule.steps, schedule.beta_start, schedule.beta_end);
}

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.steps = train.steps;
  o.batch_size = train.batch_size;
  o.learning_rate = train.learning_rate;
  o.ema_decay = train.ema_decay;
  o.seed = train.seed;
  o.checkpoint_every = train.checkpoint_every;
  return o;
}

void RunConfig::validate() const {
  make_noise_schedule();
  denoiser().validate();
  if (train.steps < 0) throw InvalidArgument("train.steps must be non-negative");
  if (train.batch_size < 1) throw InvalidArgument("train.batch_size must be positive");
  if (!(train.learning_rate > 0.0)) throw InvalidArgument("train.learning_rate must be positive");
  if (!(train.ema_decay >= 0.0 && train.ema_decay < 1.0)) throw InvalidArgument("train.ema_decay must be in [0, 1)");
  if (train.checkpoint_every < 0) throw InvalidArgument("train.checkpoint_every must be non-negative");
  const auto& r = degrade.ranges;
  if (!(r.sigma_lo > 0.0 && r.sigma_lo <= r.sigma_hi)) throw InvalidArgument("degrade sigma range is invalid");
  if (!(r.r_lo > 0.0 && r.r_lo <= r.r_hi)) throw InvalidArgument("degrade r range is invalid");
  if (!(r.delta_lo >= 0.0 && r.delta_lo <= r.delta_hi)) throw InvalidArgument("degrade delta range is invalid");
  if (!(r.q_lo >= 1 && r.q_lo <= r.q_hi && r.q_hi <= 100)) throw InvalidArgument("degrade q range is invalid");
  if (restore.truncation < 0 || restore.truncation > schedule.steps) {
    throw InvalidArgument("restore.truncation must be in [0, schedule.steps]");
  }
  if (restore.restorer != "identity" && restore.restorer != "gaussian-denoise" && restore.restorer != "external-file") {
    throw InvalidArgument("restore.restorer must be identity, gaussian-denoise or external-file");
  }
  if (!(restore.denoise_sigma > 0.0)) throw InvalidArgument("restore.denoise_sigma must be positive");
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::string section;
  int lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw InvalidArgument(where + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const auto& k : keys()) known = known || k.section == section;
      if (!known) throw InvalidArgument(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InvalidArgument(where + "expected key = value");
    if (section.empty()) throw InvalidArgument(where + "key outside of a section");
    const std::string name(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const Key* key = nullptr;
    for (const auto& k : keys()) {
      if (k.section == section && k.name == name) key = &k;
    }
    if (key == nullptr) throw InvalidArgument(where + "unknown key '" + name + "' in [" + section + "]");
    try {
      key->set(c, value);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(where + section + "." + name + ": " + e.what());
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace facediff
