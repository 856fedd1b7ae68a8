#include "facediff/nn/params.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "facediff/errors.hpp"
#include "facediff/rng.hpp"

namespace facediff::nn {

ParamHandle ParamSet::add(std::string name, std::vector<int> shape, ParamInit init) {
  const std::size_t size = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                           std::multiplies<std::size_t>());
  for (const auto& e : entries_) {
    if (e.name == name) throw InvalidArgument("duplicate parameter name " + name);
  }
  if (init.kind == ParamInit::Kind::kValues && init.values.size() != size) {
    throw ShapeError("explicit initializer for " + name + " has wrong length");
  }
  ParamEntry entry{std::move(name), std::move(shape), values_.size(), size, init};
  entries_.push_back(std::move(entry));
  values_.resize(values_.size() + size, 0.0);
  return ParamHandle{entries_.size() - 1};
}

void ParamSet::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& e : entries_) {
    auto dst = std::span<double>(values_).subspan(e.offset, e.size);
    switch (e.init.kind) {
      case ParamInit::Kind::kTruncatedNormal:
        for (double& v : dst) v = e.init.value * rng.truncated_normal();
        break;
      case ParamInit::Kind::kConstant:
        std::fill(dst.begin(), dst.end(), e.init.value);
        break;
      case ParamInit::Kind::kValues:
        std::copy(e.init.values.begin(), e.init.values.end(), dst.begin());
        break;
    }
  }
}

void ParamSet::randomize(std::uint64_t seed, double std) {
  Rng rng(seed);
  for (double& v : values_) v = std * rng.normal();
}

std::size_t ParamSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw InvalidArgument("unknown parameter " + name);
}

std::span<double> ParamSet::values(ParamHandle h) {
  const auto& e = entries_.at(h.index);
  return std::span<double>(values_).subspan(e.offset, e.size);
}

std::span<const double> ParamSet::values(ParamHandle h) const {
  const auto& e = entries_.at(h.index);
  return std::span<const double>(values_).subspan(e.offset, e.size);
}

void ParamSet::assign(std::span<const double> flat) {
  if (flat.size() != values_.size()) {
    throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) +
                     " entries, expected " + std::to_string(values_.size()));
  }
  std::copy(flat.begin(), flat.end(), values_.begin());
}

}  // namespace facediff::nn
