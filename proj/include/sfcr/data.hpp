#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "sfcr/geometry.hpp"
#include "sfcr/grid.hpp"

namespace sfcr {

// One site's irregular observations of a daily series: `idx` holds main-grid
// row indices (strictly increasing, in [0, grid.size())), `values` the
// measurements on those days.
struct SiteSeries {
  std::vector<int> idx;
  Eigen::VectorXd values;

  int count() const { return static_cast<int>(idx.size()); }
};

// Aligned per-site observation set on a common grid.  y holds the positivity
// series (unit-interval values; a site's y may be empty, e.g. held out), x the
// log-concentration series (at least one observation per site).  `regions`
// carries the site footprints when geography is available; it is either empty
// or aligned with site_ids.
struct Dataset {
  Grid grid;
  std::vector<std::string> site_ids;
  std::vector<Region> regions;
  std::vector<SiteSeries> y;
  std::vector<SiteSeries> x;

  int n() const { return static_cast<int>(site_ids.size()); }
  // unit_interval_y = false relaxes only the [0,1] range check, for synthetic
  // data generated without clamping (exactness and calibration tests).
  void validate(bool unit_interval_y = true) const;
};

}  // namespace sfcr
