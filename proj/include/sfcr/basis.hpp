#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sfcr/grid.hpp"

namespace sfcr {

enum class BasisKind { PenalizedBspline, OrthogonalizedTps, DemmlerReinsch };

// A basis evaluated on a daily grid together with its roughness penalty.
//   eval    : grid length x rank, column j = j-th basis function on the grid
//   penalty : rank x rank, symmetric PSD; diagonal for the orthogonalized kinds
//   rank    : number of basis columns
//   penalty_rank : number of nonzero penalty eigenvalues (prior rank)
struct BasisSystem {
  BasisKind kind = BasisKind::PenalizedBspline;
  Eigen::MatrixXd eval;
  Eigen::MatrixXd penalty;
  int rank = 0;
  int penalty_rank = 0;
};

// Clamped cubic B-splines with equally spaced interior knots and a
// second-difference penalty on the coefficients.  Used for the regression
// coefficient curve.  Requires 4 <= num_basis <= grid length.
BasisSystem build_bspline(const Grid& grid, int num_basis);

// Low-rank thin-plate spline system: cubic radial basis |t-k|^3 with knots at
// grid quantiles plus an affine part, radial block pre-whitened by the SVD
// square root of the knot distance matrix, then basis and penalty are
// simultaneously diagonalized so eval has orthonormal columns and the penalty
// is diagonal nonnegative (columns ordered smoothest first; the two
// zero-penalty columns are the constant and centered-linear directions).
// Used for the exposure-process loading curves.  Requires 4 <= num_basis <=
// grid length.
BasisSystem build_lrtps(const Grid& grid, int num_basis);

// Demmler-Reinsch system: cubic B-splines with a knot at every grid day and a
// second-difference coefficient penalty, profiled onto grid-value space and
// eigendecomposed; the num_basis smoothest directions are retained.  eval
// columns are exactly orthonormal, penalty diagonal is nondecreasing with the
// first entry 0 (constant direction).  Used for the residual-process loading
// curves.  Requires 1 <= num_basis <= grid length.
BasisSystem build_demmler_reinsch(const Grid& grid, int num_basis);

// Rows of basis.eval at the requested grid row indices (0-based into the grid
// the basis was built on).  Out-of-range indices raise DimensionError.
Eigen::MatrixXd evaluate_subset(const BasisSystem& basis, const Grid& grid,
                                const std::vector<int>& indices);

}  // namespace sfcr
