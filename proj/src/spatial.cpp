#include "sfcr/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace sfcr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Uniform-bin index over a point set supporting exact nearest-point queries.
// Cells are scanned in Chebyshev rings around the query; the search stops once
// every unscanned ring is provably farther than the current best, so the
// result equals the brute-force minimum.
class PointGrid {
 public:
  PointGrid(const std::vector<Point>& pts, double cell) : pts_(pts), cell_(cell) {
    double inf = kInf;
    ox_ = inf;
    oy_ = inf;
    double mx = -inf, my = -inf;
    for (const auto& p : pts) {
      ox_ = std::min(ox_, p[0]);
      oy_ = std::min(oy_, p[1]);
      mx = std::max(mx, p[0]);
      my = std::max(my, p[1]);
    }
    nx_ = std::max(1L, static_cast<long>(std::floor((mx - ox_) / cell_)) + 1);
    ny_ = std::max(1L, static_cast<long>(std::floor((my - oy_) / cell_)) + 1);
    buckets_.resize(static_cast<size_t>(nx_ * ny_));
    for (int i = 0; i < static_cast<int>(pts.size()); ++i)
      buckets_[bucket_of(pts[i][0], pts[i][1])].push_back(i);
  }

  double nearest(double x, double y) const {
    const long cx = clamp_x(cell_x(x));
    const long cy = clamp_y(cell_y(y));
    const long rmax = std::max(std::max(cx, nx_ - 1 - cx), std::max(cy, ny_ - 1 - cy));
    double best = kInf;
    for (long r = 0;; ++r) {
      if (r > 0 && best < kInf) {
        // Ring r lies outside the box of rings 0..r-1; if the query sits
        // inside that box, its margin to the box faces bounds every
        // unscanned distance from below.
        const double lox = ox_ + (cx - (r - 1)) * cell_;
        const double hix = ox_ + (cx + r) * cell_;
        const double loy = oy_ + (cy - (r - 1)) * cell_;
        const double hiy = oy_ + (cy + r) * cell_;
        if (x >= lox && x <= hix && y >= loy && y <= hiy) {
          const double margin =
              std::min(std::min(x - lox, hix - x), std::min(y - loy, hiy - y));
          if (margin > best) return best;
        }
      }
      scan_ring(cx, cy, r, x, y, best);
      if (r >= rmax) return best;
    }
  }

 private:
  long cell_x(double x) const { return static_cast<long>(std::floor((x - ox_) / cell_)); }
  long cell_y(double y) const { return static_cast<long>(std::floor((y - oy_) / cell_)); }
  long clamp_x(long c) const { return std::min(std::max(c, 0L), nx_ - 1); }
  long clamp_y(long c) const { return std::min(std::max(c, 0L), ny_ - 1); }
  size_t bucket_of(double x, double y) const {
    return static_cast<size_t>(clamp_y(cell_y(y)) * nx_ + clamp_x(cell_x(x)));
  }

  void scan_cell(long ix, long iy, double x, double y, double& best) const {
    if (ix < 0 || ix >= nx_ || iy < 0 || iy >= ny_) return;
    for (int idx : buckets_[static_cast<size_t>(iy * nx_ + ix)]) {
      const double d = std::hypot(pts_[idx][0] - x, pts_[idx][1] - y);
      best = std::min(best, d);
    }
  }

  void scan_ring(long cx, long cy, long r, double x, double y, double& best) const {
    if (r == 0) {
      scan_cell(cx, cy, x, y, best);
      return;
    }
    for (long ix = cx - r; ix <= cx + r; ++ix) {
      scan_cell(ix, cy - r, x, y, best);
      scan_cell(ix, cy + r, x, y, best);
    }
    for (long iy = cy - r + 1; iy <= cy + r - 1; ++iy) {
      scan_cell(cx - r, iy, x, y, best);
      scan_cell(cx + r, iy, x, y, best);
    }
  }

  const std::vector<Point>& pts_;
  double cell_;
  double ox_ = 0.0, oy_ = 0.0;
  long nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

double directed_quantile(const std::vector<Point>& src, const PointGrid& target, double q) {
  std::vector<double> dist(src.size());
  for (size_t i = 0; i < src.size(); ++i) dist[i] = target.nearest(src[i][0], src[i][1]);
  std::sort(dist.begin(), dist.end());
  const long n = static_cast<long>(dist.size());
  long idx = static_cast<long>(std::ceil(q * n)) - 1;
  idx = std::min(std::max(idx, 0L), n - 1);
  return dist[static_cast<size_t>(idx)];
}

double default_spacing(const std::array<double, 4>& box) {
  const double diag = std::hypot(box[2] - box[0], box[3] - box[1]);
  if (!(diag > 0.0)) throw GeometryError("regions have a degenerate joint bounding box");
  return diag / 200.0;
}

double resolve_spacing(double resolution, const std::array<double, 4>& box) {
  if (resolution > 0.0) return 1.0 / resolution;
  return default_spacing(box);
}

}  // namespace

double extended_hausdorff(const Region& a, const Region& b, double quantile, double resolution) {
  if (!(quantile > 0.0) || quantile > 1.0)
    throw ConfigError("quantile", "hausdorff quantile must lie in (0, 1]");
  a.validate();
  b.validate();
  const double spacing = resolve_spacing(resolution, joint_bbox({a, b}));
  const auto pa = sample_region_points(a, spacing);
  const auto pb = sample_region_points(b, spacing);
  PointGrid ga(pa, spacing), gb(pb, spacing);
  return std::max(directed_quantile(pa, gb, quantile), directed_quantile(pb, ga, quantile));
}

SpatialGraph knn_weights(const std::vector<Region>& regions, int k, double quantile,
                         double resolution) {
  const int n = static_cast<int>(regions.size());
  if (n < 2) throw DimensionError("need at least 2 regions for a spatial graph");
  if (k < 1 || k >= n) throw DimensionError("neighbor count k must satisfy 1 <= k < #regions");
  if (!(quantile > 0.0) || quantile > 1.0)
    throw ConfigError("quantile", "hausdorff quantile must lie in (0, 1]");
  for (const auto& r : regions) r.validate();

  // One shared sampling resolution across the collection so pairwise
  // distances are mutually consistent.
  const double spacing = resolve_spacing(resolution, joint_bbox(regions));
  std::vector<std::vector<Point>> samples;
  samples.reserve(regions.size());
  for (const auto& r : regions) samples.push_back(sample_region_points(r, spacing));
  std::vector<PointGrid> grids;
  grids.reserve(samples.size());
  for (const auto& s : samples) grids.emplace_back(s, spacing);

  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = std::max(directed_quantile(samples[i], grids[j], quantile),
                                directed_quantile(samples[j], grids[i], quantile));
      dist(i, j) = d;
      dist(j, i) = d;
    }

  SpatialGraph graph;
  for (const auto& r : regions) graph.ids.push_back(r.id);
  graph.D = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> order;
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    // Ties broken toward the smaller site index.
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return dist(i, a) < dist(i, b); });
    for (int r = 0; r < k; ++r) graph.D(i, order[r]) = 1.0;
  }
  graph.D = graph.D.cwiseMax(graph.D.transpose().eval());  // union symmetrization

  graph.Q = Eigen::MatrixXd(graph.D.rowwise().sum().asDiagonal());
  graph.Q -= graph.D;
  graph.jitter = 1e-6 * graph.Q.diagonal().mean();

  // Connectivity (disconnected graphs stay usable thanks to the jitter, but
  // callers may want to warn).
  std::vector<bool> seen(n, false);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = true;
  int reached = 1;
  while (!frontier.empty()) {
    const int i = frontier.front();
    frontier.pop();
    for (int j = 0; j < n; ++j)
      if (graph.D(i, j) > 0 && !seen[j]) {
        seen[j] = true;
        ++reached;
        frontier.push(j);
      }
  }
  graph.connected = reached == n;
  return graph;
}

double car_quadform(const SpatialGraph& graph, const Eigen::VectorXd& theta) {
  if (theta.size() != graph.size())
    throw DimensionError("car_quadform: vector length does not match graph size");
  return theta.dot(graph.Q * theta) + graph.jitter * theta.squaredNorm();
}

}  // namespace sfcr
