#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sfcr/geometry.hpp"

namespace sfcr {

// Site adjacency derived from inter-region distances.
//   D : binary symmetric k-nearest-neighbor weights, zero diagonal
//   Q : intrinsic CAR precision diag(D*1) - D
//   jitter : diagonal inflation (1e-6 * mean diag Q) making Q + jitter*I SPD
struct SpatialGraph {
  std::vector<std::string> ids;
  Eigen::MatrixXd D;
  Eigen::MatrixXd Q;
  double jitter = 0.0;
  bool connected = true;

  int size() const { return static_cast<int>(ids.size()); }
};

// Quantile (extended) Hausdorff distance between two regions.  Both regions
// are densely sampled (boundary marches + interior lattice); each directed
// value is the `quantile` order statistic, over source points, of the
// distance to the nearest target sample point; the symmetric distance is the
// larger directed value.  quantile 1.0 recovers the classical Hausdorff
// distance; 0.5 (the default elsewhere) is the median variant.  `resolution`
// is the sampling density per unit length; nonpositive selects the default of
// 200 points across the joint bounding-box diagonal.
double extended_hausdorff(const Region& a, const Region& b, double quantile,
                          double resolution = 0.0);

// Symmetric binary kNN weights under the quantile Hausdorff distance
// (neighbor ties broken toward the smaller site index, union symmetrization),
// and the induced intrinsic CAR precision.  Requires 1 <= k < #regions.
SpatialGraph knn_weights(const std::vector<Region>& regions, int k, double quantile = 0.5,
                         double resolution = 0.0);

// theta' (Q + jitter*I) theta.
double car_quadform(const SpatialGraph& graph, const Eigen::VectorXd& theta);

}  // namespace sfcr
