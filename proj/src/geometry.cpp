#include "sfcr/geometry.hpp"

#include <cmath>
#include <limits>

namespace sfcr {
namespace {

double ring_area(const Ring& ring) {
  double twice = 0.0;
  const int n = static_cast<int>(ring.size());
  for (int i = 0; i < n; ++i) {
    const auto& a = ring[i];
    const auto& b = ring[(i + 1) % n];
    twice += a[0] * b[1] - b[0] * a[1];
  }
  return 0.5 * std::abs(twice);
}

}  // namespace

void Region::validate() const {
  if (rings.empty()) throw GeometryError("region '" + id + "' has no rings");
  for (const auto& ring : rings) {
    if (ring.size() < 3)
      throw GeometryError("region '" + id + "' has a ring with fewer than 3 vertices");
    for (const auto& p : ring)
      if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
        throw GeometryError("region '" + id + "' has non-finite coordinates");
    if (ring_area(ring) <= 0.0)
      throw GeometryError("region '" + id + "' has a degenerate (zero-area) ring");
  }
}

std::array<double, 4> region_bbox(const Region& region) {
  double inf = std::numeric_limits<double>::infinity();
  std::array<double, 4> box{inf, inf, -inf, -inf};
  for (const auto& ring : region.rings)
    for (const auto& p : ring) {
      box[0] = std::min(box[0], p[0]);
      box[1] = std::min(box[1], p[1]);
      box[2] = std::max(box[2], p[0]);
      box[3] = std::max(box[3], p[1]);
    }
  return box;
}

std::array<double, 4> joint_bbox(const std::vector<Region>& regions) {
  double inf = std::numeric_limits<double>::infinity();
  std::array<double, 4> box{inf, inf, -inf, -inf};
  for (const auto& r : regions) {
    auto b = region_bbox(r);
    box[0] = std::min(box[0], b[0]);
    box[1] = std::min(box[1], b[1]);
    box[2] = std::max(box[2], b[2]);
    box[3] = std::max(box[3], b[3]);
  }
  return box;
}

bool point_in_region(const Region& region, double x, double y) {
  // Even-odd ray cast over all rings; holes flip parity naturally.
  bool inside = false;
  for (const auto& ring : region.rings) {
    const int n = static_cast<int>(ring.size());
    for (int i = 0, j = n - 1; i < n; j = i++) {
      const double xi = ring[i][0], yi = ring[i][1];
      const double xj = ring[j][0], yj = ring[j][1];
      if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) inside = !inside;
    }
  }
  return inside;
}

std::vector<Point> sample_region_points(const Region& region, double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw GeometryError("sampling spacing must be positive and finite");
  std::vector<Point> pts;

  // Boundary: every vertex, then points marched along each edge.  Restarting
  // the march at each vertex keeps corners in the sample exactly.
  for (const auto& ring : region.rings) {
    const int n = static_cast<int>(ring.size());
    for (int i = 0; i < n; ++i) {
      const auto& a = ring[i];
      const auto& b = ring[(i + 1) % n];
      pts.push_back(a);
      const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
      for (double t = spacing; t < len; t += spacing)
        pts.push_back({a[0] + (b[0] - a[0]) * t / len, a[1] + (b[1] - a[1]) * t / len});
    }
  }

  // Interior lattice on absolute multiples of the spacing.
  const auto box = region_bbox(region);
  const long ix0 = static_cast<long>(std::ceil(box[0] / spacing));
  const long ix1 = static_cast<long>(std::floor(box[2] / spacing));
  const long iy0 = static_cast<long>(std::ceil(box[1] / spacing));
  const long iy1 = static_cast<long>(std::floor(box[3] / spacing));
  for (long ix = ix0; ix <= ix1; ++ix)
    for (long iy = iy0; iy <= iy1; ++iy) {
      const double x = ix * spacing, y = iy * spacing;
      if (point_in_region(region, x, y)) pts.push_back({x, y});
    }
  return pts;
}

}  // namespace sfcr
