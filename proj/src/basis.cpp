#include "sfcr/basis.hpp"

#include <algorithm>
#include <cmath>

namespace sfcr {
namespace {

// Cubic-B-spline design matrix by the de Boor recurrence.  `knots` must be
// nondecreasing with full (degree+1) multiplicity at both ends; evaluation
// points must lie in [knots.front(), knots.back()].
Eigen::MatrixXd bspline_design(const std::vector<double>& x, const std::vector<double>& knots,
                               int degree) {
  const int nbasis = static_cast<int>(knots.size()) - degree - 1;
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<int>(x.size()), nbasis);
  std::vector<double> N(degree + 1), left(degree + 1), right(degree + 1);
  for (int row = 0; row < static_cast<int>(x.size()); ++row) {
    const double xi = x[row];
    // Knot span containing xi; the right endpoint belongs to the last span.
    int span;
    if (xi >= knots[nbasis]) {
      span = nbasis - 1;
    } else {
      span = static_cast<int>(std::upper_bound(knots.begin(), knots.end(), xi) - knots.begin()) - 1;
      if (span < degree) span = degree;
    }
    N[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
      left[j] = xi - knots[span + 1 - j];
      right[j] = knots[span + j] - xi;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double temp = N[r] / (right[r + 1] + left[j - r]);
        N[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      N[j] = saved;
    }
    for (int r = 0; r <= degree; ++r) design(row, span - degree + r) = N[r];
  }
  return design;
}

// (n-2) x n second-difference operator.
Eigen::MatrixXd second_difference(int n) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n - 2, n);
  for (int r = 0; r < n - 2; ++r) {
    d(r, r) = 1.0;
    d(r, r + 1) = -2.0;
    d(r, r + 2) = 1.0;
  }
  return d;
}

// Clamped knot vector on [a, b] with the given interior knots.
std::vector<double> clamped_knots(double a, double b, const std::vector<double>& interior,
                                  int degree) {
  std::vector<double> knots;
  knots.insert(knots.end(), degree + 1, a);
  knots.insert(knots.end(), interior.begin(), interior.end());
  knots.insert(knots.end(), degree + 1, b);
  return knots;
}

// Grid days affinely mapped to [0, 1]; keeps cubic radial terms conditioned.
Eigen::VectorXd unit_abscissa(const Grid& grid) {
  Eigen::VectorXd s(grid.size());
  const double a = grid.day(0);
  const double b = grid.day(grid.size() - 1);
  for (int i = 0; i < grid.size(); ++i) s(i) = (grid.day(i) - a) / (b - a);
  return s;
}

// Deterministic rotation of the zero-penalty block: make the first null
// column the (normalized) constant and the second the centered-linear
// direction.  The block spans exactly those functions, so this is a rotation
// within the eigenspace and preserves orthonormality.
void rotate_null_block(Eigen::MatrixXd& eval, const Eigen::VectorXd& diag, const Eigen::VectorXd& s) {
  int nzero = 0;
  while (nzero < diag.size() && diag(nzero) == 0.0) ++nzero;
  if (nzero == 0) return;
  const int m = static_cast<int>(eval.rows());
  Eigen::MatrixXd block = eval.leftCols(nzero);
  std::vector<Eigen::VectorXd> targets;
  targets.push_back(Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(static_cast<double>(m))));
  Eigen::VectorXd lin = s.array() - s.mean();
  if (lin.norm() > 0) targets.push_back(lin / lin.norm());
  std::vector<Eigen::VectorXd> cols;
  for (const auto& t : targets) {
    if (static_cast<int>(cols.size()) == nzero) break;
    Eigen::VectorXd v = block * (block.transpose() * t);  // projection onto the block span
    for (const auto& c : cols) v -= c.dot(v) * c;
    if (v.norm() < 1e-8) continue;
    cols.push_back(v / v.norm());
  }
  // Top up from the original block columns if the block is larger than two.
  for (int j = 0; j < nzero && static_cast<int>(cols.size()) < nzero; ++j) {
    Eigen::VectorXd v = block.col(j);
    for (const auto& c : cols) v -= c.dot(v) * c;
    if (v.norm() < 1e-8) continue;
    cols.push_back(v / v.norm());
  }
  for (int j = 0; j < static_cast<int>(cols.size()); ++j) eval.col(j) = cols[j];
}

// Simultaneous diagonalization: returns T with (B T)'(B T) = I and T'S T
// diagonal (ascending), via Cholesky of the Gram and a symmetric
// eigendecomposition.  Requires B to have full column rank.
void diagonalize(const Eigen::MatrixXd& B, const Eigen::MatrixXd& S, Eigen::MatrixXd& eval,
                 Eigen::VectorXd& diag) {
  Eigen::MatrixXd gram = B.transpose() * B;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw DimensionError("basis design is rank deficient on this grid");
  Eigen::MatrixXd half = llt.matrixL().solve(S);                      // L^-1 S
  Eigen::MatrixXd A = llt.matrixL().solve(half.transpose()).transpose();  // L^-1 S L^-T
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (A + A.transpose()));
  if (eig.info() != Eigen::Success) throw DimensionError("penalty eigendecomposition failed");
  Eigen::MatrixXd T = llt.matrixU().solve(eig.eigenvectors());
  eval = B * T;
  diag = eig.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, diag.cwiseAbs().maxCoeff());
  for (int j = 0; j < diag.size(); ++j)
    if (diag(j) < tol) diag(j) = 0.0;
}

int count_positive(const Eigen::VectorXd& d) {
  int n = 0;
  for (int j = 0; j < d.size(); ++j)
    if (d(j) > 0.0) ++n;
  return n;
}

}  // namespace

BasisSystem build_bspline(const Grid& grid, int num_basis) {
  grid.validate();
  if (num_basis < 4) throw DimensionError("cubic B-spline basis needs num_basis >= 4");
  if (num_basis > grid.size())
    throw DimensionError("num_basis exceeds grid length (grid too short)");
  const Eigen::VectorXd s = unit_abscissa(grid);
  std::vector<double> interior(num_basis - 4);
  for (int j = 0; j < num_basis - 4; ++j)
    interior[j] = static_cast<double>(j + 1) / (num_basis - 3);
  const auto knots = clamped_knots(0.0, 1.0, interior, 3);
  std::vector<double> xs(s.data(), s.data() + s.size());

  BasisSystem out;
  out.kind = BasisKind::PenalizedBspline;
  out.eval = bspline_design(xs, knots, 3);
  const Eigen::MatrixXd d2 = second_difference(num_basis);
  out.penalty = d2.transpose() * d2;
  out.rank = num_basis;
  out.penalty_rank = num_basis - 2;
  return out;
}

BasisSystem build_lrtps(const Grid& grid, int num_basis) {
  grid.validate();
  // Two affine columns plus at least two radial knots (one knot's radial Gram
  // is the zero matrix, which cannot be whitened).
  if (num_basis < 4) throw DimensionError("thin-plate basis needs num_basis >= 4");
  if (num_basis > grid.size())
    throw DimensionError("num_basis exceeds grid length (grid too short)");
  const int m = grid.size();
  const int nknots = num_basis - 2;
  const Eigen::VectorXd s = unit_abscissa(grid);

  // Knots at grid quantiles (type-7 sample quantiles of the abscissa).
  Eigen::VectorXd knots(nknots);
  for (int j = 0; j < nknots; ++j) {
    const double p = static_cast<double>(j + 1) / (nknots + 1);
    const double h = p * (m - 1);
    const int lo = static_cast<int>(std::floor(h));
    const int hi = std::min(lo + 1, m - 1);
    knots(j) = s(lo) + (h - lo) * (s(hi) - s(lo));
  }

  Eigen::MatrixXd radial(m, nknots);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < nknots; ++j) radial(i, j) = std::pow(std::abs(s(i) - knots(j)), 3);
  Eigen::MatrixXd omega(nknots, nknots);
  for (int i = 0; i < nknots; ++i)
    for (int j = 0; j < nknots; ++j) omega(i, j) = std::pow(std::abs(knots(i) - knots(j)), 3);

  // Pre-whiten the radial block by the SVD square root of omega; the working
  // penalty then is diag(0, 0, I), which is PSD (the raw |k-k'|^3 matrix is
  // indefinite and unusable as a quadratic form directly).
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(omega, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd sqrt_omega = svd.matrixU() *
                               svd.singularValues().cwiseSqrt().asDiagonal() *
                               svd.matrixV().transpose();
  Eigen::MatrixXd b(m, num_basis);
  b.col(0).setOnes();
  b.col(1) = s;
  b.rightCols(nknots) = sqrt_omega.fullPivLu().solve(radial.transpose()).transpose();
  Eigen::MatrixXd pen = Eigen::MatrixXd::Zero(num_basis, num_basis);
  pen.diagonal().tail(nknots).setOnes();

  BasisSystem out;
  out.kind = BasisKind::OrthogonalizedTps;
  Eigen::VectorXd diag;
  diagonalize(b, pen, out.eval, diag);
  rotate_null_block(out.eval, diag, s);
  out.penalty = diag.asDiagonal();
  out.rank = num_basis;
  out.penalty_rank = count_positive(diag);
  return out;
}

BasisSystem build_demmler_reinsch(const Grid& grid, int num_basis) {
  grid.validate();
  if (num_basis < 1) throw DimensionError("num_basis must be positive");
  if (num_basis > grid.size())
    throw DimensionError("num_basis exceeds the available directions (grid length)");
  const int m = grid.size();
  const Eigen::VectorXd s = unit_abscissa(grid);

  // B-splines with a knot at every grid day: m+2 columns on m rows.
  std::vector<double> interior(s.data() + 1, s.data() + m - 1);
  const auto knots = clamped_knots(0.0, 1.0, interior, 3);
  std::vector<double> xs(s.data(), s.data() + s.size());
  Eigen::MatrixXd z = bspline_design(xs, knots, 3);
  const Eigen::MatrixXd d2 = second_difference(m + 2);
  Eigen::MatrixXd pen = d2.transpose() * d2;

  // The design is overcomplete (coefficients that vanish on the grid exist),
  // so profile the coefficient penalty onto grid-value space:
  //   pen(v) = min { u'Su : Z u = v }
  // computed from the SVD of Z.  Affine functions keep exactly zero penalty.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const double smax = svd.singularValues()(0);
  int rank = 0;
  for (int j = 0; j < svd.singularValues().size(); ++j)
    if (svd.singularValues()(j) > 1e-12 * smax) ++rank;
  if (num_basis > rank) throw DimensionError("num_basis exceeds the available directions");
  Eigen::MatrixXd vr = svd.matrixV().leftCols(rank);
  Eigen::MatrixXd nullsp = svd.matrixV().rightCols(m + 2 - rank);
  Eigen::MatrixXd zplus = vr *
                          svd.singularValues().head(rank).cwiseInverse().asDiagonal() *
                          svd.matrixU().leftCols(rank).transpose();  // (m+2) x m
  Eigen::MatrixXd pn = pen * nullsp;
  Eigen::MatrixXd profiled =
      pen - pn * (nullsp.transpose() * pn).ldlt().solve(pn.transpose());
  Eigen::MatrixXd k = zplus.transpose() * profiled * zplus;
  k = 0.5 * (k + k.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  if (eig.info() != Eigen::Success) throw DimensionError("penalty eigendecomposition failed");
  Eigen::VectorXd d = eig.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, d.cwiseAbs().maxCoeff());
  for (int j = 0; j < d.size(); ++j)
    if (d(j) < tol) d(j) = 0.0;

  BasisSystem out;
  out.kind = BasisKind::DemmlerReinsch;
  out.eval = eig.eigenvectors().leftCols(num_basis);
  Eigen::VectorXd diag = d.head(num_basis);
  rotate_null_block(out.eval, diag, s);
  out.penalty = diag.asDiagonal();
  out.rank = num_basis;
  out.penalty_rank = count_positive(diag);
  return out;
}

Eigen::MatrixXd evaluate_subset(const BasisSystem& basis, const Grid& grid,
                                const std::vector<int>& indices) {
  if (basis.eval.rows() != grid.size())
    throw DimensionError("basis was not built on the supplied grid");
  Eigen::MatrixXd out(static_cast<int>(indices.size()), basis.rank);
  for (int r = 0; r < static_cast<int>(indices.size()); ++r) {
    const int i = indices[r];
    if (i < 0 || i >= grid.size())
      throw DimensionError("requested grid index outside the built range");
    out.row(r) = basis.eval.row(i);
  }
  return out;
}

}  // namespace sfcr
