#pragma once

#include <array>
#include <string>
#include <vector>

#include "sfcr/error.hpp"

namespace sfcr {

using Point = std::array<double, 2>;
using Ring = std::vector<Point>;  // stored unclosed (no repeated end vertex)

// Planar polygonal region, possibly with holes or several disjoint parts.
// Containment uses the even-odd rule over all rings, which handles both
// uniformly.  Coordinates are projected (meters or similar) — never lon/lat.
struct Region {
  std::string id;
  std::vector<Ring> rings;

  void validate() const;  // >= 3 vertices, finite coordinates, nonzero ring areas
};

// minx, miny, maxx, maxy over all rings.
std::array<double, 4> region_bbox(const Region& region);
std::array<double, 4> joint_bbox(const std::vector<Region>& regions);

bool point_in_region(const Region& region, double x, double y);

// Deterministic dense point sample of a region: every ring vertex, boundary
// points marched at `spacing` along each edge, and an interior lattice on
// absolute multiples of `spacing` (so congruent regions sample congruently).
std::vector<Point> sample_region_points(const Region& region, double spacing);

}  // namespace sfcr
