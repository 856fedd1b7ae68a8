#pragma once

#include <cstdint>

#include "facediff/morphable3d.hpp"

namespace facediff {

/// Toy "high-quality" face photo: the shaded render of c over a smooth
/// striped background, plus fine blurred grain. Deterministic in seed.
Tensor synth_face_image(const FacePriorModel& model, const Coeff3DMM& c, int size, std::uint64_t seed);

}  // namespace facediff
