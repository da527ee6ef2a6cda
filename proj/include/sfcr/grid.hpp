#pragma once

#include <vector>

#include "sfcr/error.hpp"

namespace sfcr {

// Common daily time grid.  Day indices are consecutive integers (spacing is
// exactly one day); `extension` prepends extra days on the left so that
// left-shifted evaluations X(t - lag) stay inside the grid for lags up to the
// extension.  Exposure-side bases are built on extended(), response-side bases
// on the grid itself.
struct Grid {
  int start_day = 0;  // day index of the first modeled day
  int num_days = 0;   // M
  int extension = 0;  // extra days prepended on the left

  int size() const { return num_days; }
  int ext_size() const { return num_days + extension; }
  int day(int i) const { return start_day + i; }  // i in [0, num_days)

  // The extension folded into the main span: a plain grid whose rows are the
  // extension days followed by the modeled days.
  Grid extended() const { return Grid{start_day - extension, num_days + extension, 0}; }

  void validate() const {
    if (num_days < 2) throw DimensionError("grid needs at least 2 days");
    if (extension < 0) throw DimensionError("grid extension must be nonnegative");
  }
};

}  // namespace sfcr
