#pragma once

#include <functional>
#include <limits>

#include "sfcr/rng.hpp"

namespace sfcr {

struct SliceOptions {
  double width = 1.0;
  int max_stepout = 50;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

// One stepping-out-and-shrinkage slice-sampling transition targeting the
// given log density restricted to [lower, upper].  Throws SamplerError if the
// density is not finite at the current point.
double slice_sample(const std::function<double(double)>& logdensity, double current,
                    const SliceOptions& opt, Rng& rng);

}  // namespace sfcr
