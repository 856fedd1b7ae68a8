#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace facediff::nn {

/// How a parameter tensor is filled by ParamSet::initialize.
struct ParamInit {
  enum class Kind { kTruncatedNormal, kConstant, kValues };
  Kind kind = Kind::kTruncatedNormal;
  double value = 0.02;  // std for kTruncatedNormal, fill value for kConstant
  std::vector<double> values;  // kValues only; must match the entry size

  static ParamInit normal(double std = 0.02) { return {Kind::kTruncatedNormal, std, {}}; }
  static ParamInit constant(double v) { return {Kind::kConstant, v, {}}; }
  static ParamInit zeros() { return constant(0.0); }
  static ParamInit ones() { return constant(1.0); }
  static ParamInit explicit_values(std::vector<double> v) { return {Kind::kValues, 0.0, std::move(v)}; }
};

struct ParamHandle {
  std::size_t index = 0;
};

struct ParamEntry {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  ParamInit init;
};

/// Named trainable tensors stored back to back in one flat vector.
///
/// The flat layout is the registration order, so the flat view is a pure
/// function of the architecture and the parameter count never depends on the
/// values.
class ParamSet {
 public:
  ParamHandle add(std::string name, std::vector<int> shape, ParamInit init);

  /// Fills every entry from its ParamInit with a single RNG stream.
  void initialize(std::uint64_t seed);
  /// Overwrites every entry with N(0, std) draws; used to probe gradients away
  /// from the zero-initialized layers.
  void randomize(std::uint64_t seed, double std);

  std::size_t count() const { return values_.size(); }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  const ParamEntry& entry(ParamHandle h) const { return entries_.at(h.index); }
  std::size_t find(const std::string& name) const;

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }
  std::span<double> values(ParamHandle h);
  std::span<const double> values(ParamHandle h) const;

  void assign(std::span<const double> flat);

 private:
  std::vector<ParamEntry> entries_;
  std::vector<double> values_;
};

}  // namespace facediff::nn
