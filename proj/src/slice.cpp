#include "sfcr/slice.hpp"

#include <algorithm>
#include <cmath>

#include "sfcr/error.hpp"

namespace sfcr {

double slice_sample(const std::function<double(double)>& logdensity, double current,
                    const SliceOptions& opt, Rng& rng) {
  if (current < opt.lower || current > opt.upper)
    throw SamplerError("slice", "current point outside the bounds");
  const double f0 = logdensity(current);
  if (!std::isfinite(f0)) throw SamplerError("slice", "log density not finite at current point");

  // Slice level, then an interval of size `width` randomly positioned around
  // the current point, stepped out until both ends leave the slice (or hit a
  // bound / the step-out budget).
  const double level = f0 - rng.exponential();
  double left = current - opt.width * rng.uniform();
  double right = left + opt.width;
  left = std::max(left, opt.lower);
  right = std::min(right, opt.upper);
  for (int j = 0; j < opt.max_stepout && left > opt.lower && logdensity(left) > level; ++j)
    left = std::max(left - opt.width, opt.lower);
  for (int j = 0; j < opt.max_stepout && right < opt.upper && logdensity(right) > level; ++j)
    right = std::min(right + opt.width, opt.upper);

  // Shrinkage: sample within the interval, shrinking toward the current
  // point on rejection.  Terminates with probability one; the counter guards
  // against a logdensity that never exceeds the level due to NaNs.
  for (int j = 0; j < 1000; ++j) {
    const double x = rng.uniform(left, right);
    if (logdensity(x) > level) return x;
    if (x < current)
      left = x;
    else
      right = x;
  }
  throw SamplerError("slice", "shrinkage failed to find an acceptable point");
}

}  // namespace sfcr
