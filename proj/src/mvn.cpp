#include "sfcr/mvn.hpp"

#include <Eigen/Cholesky>
#include <boost/math/special_functions/gamma.hpp>

#include "sfcr/error.hpp"

namespace sfcr {

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_precision(const Eigen::MatrixXd& Q) {
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::MatrixXd inflated = Q;
  inflated.diagonal().array() += 1e-10;
  llt.compute(inflated);
  if (llt.info() == Eigen::Success) return llt;
  throw SamplerError("cholesky", "precision matrix is not positive definite (even after inflation)");
}

Eigen::VectorXd draw_with(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& l,
                          Rng& rng) {
  Eigen::VectorXd z(l.size());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  // With Q = L L^T, cov(L^-T z) = Q^-1.
  return llt.solve(l) + llt.matrixU().solve(z);
}

}  // namespace

Eigen::VectorXd sample_gaussian_precision(const Eigen::MatrixXd& Q, const Eigen::VectorXd& l,
                                          Rng& rng) {
  if (Q.rows() != Q.cols() || Q.rows() != l.size())
    throw DimensionError("gaussian draw: Q and l shapes disagree");
  return draw_with(factor_precision(Q), l, rng);
}

Eigen::VectorXd sample_gaussian_constrained(const Eigen::MatrixXd& Q, const Eigen::VectorXd& l,
                                            const Eigen::MatrixXd& C, Rng& rng) {
  if (Q.rows() != Q.cols() || Q.rows() != l.size())
    throw DimensionError("gaussian draw: Q and l shapes disagree");
  if (C.rows() == 0) return sample_gaussian_precision(Q, l, rng);
  if (C.cols() != Q.cols()) throw DimensionError("gaussian draw: constraint width mismatch");
  auto llt = factor_precision(Q);
  Eigen::VectorXd x0 = draw_with(llt, l, rng);
  Eigen::MatrixXd S = llt.solve(C.transpose());        // Q^-1 C'
  Eigen::MatrixXd cap = C * S;                         // C Q^-1 C'
  Eigen::LDLT<Eigen::MatrixXd> cap_ldlt(cap);
  const Eigen::VectorXd d = cap_ldlt.vectorD();
  if (!(d.maxCoeff() > 0.0) || d.minCoeff() <= d.maxCoeff() * 1e-12)
    throw SamplerError("constraint", "constraint rows are linearly dependent");
  Eigen::VectorXd w = cap_ldlt.solve(C * x0);
  return x0 - S * w;
}

double truncated_gamma(double shape, double rate, double lower, Rng& rng) {
  if (shape <= 0 || rate <= 0)
    throw SamplerError("gamma", "truncated gamma needs positive shape and rate");
  if (lower <= 0) return rng.gamma(shape, rate);
  // Inverse-CDF on the tail mass above `lower`.
  double p0 = boost::math::gamma_p(shape, rate * lower);
  if (p0 >= 1.0) {
    // Essentially no mass above the bound; return the bound itself rather
    // than chase a subnormal tail.
    return lower;
  }
  double u = p0 + (1.0 - p0) * rng.uniform();
  if (u >= 1.0) u = std::nexttoward(1.0, 0.0);
  return boost::math::gamma_p_inv(shape, u) / rate;
}

}  // namespace sfcr
