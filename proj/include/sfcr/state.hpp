#pragma once

#include <Eigen/Core>

#include "sfcr/error.hpp"
#include "sfcr/params.hpp"

namespace sfcr {

// Full parameter state of the model.  Conventions:
//  - columns index sites (theta, alpha, zeta are (factors x n));
//  - loading coefficients are stored one factor per column (psi: H x K,
//    phi: J x L);
//  - error/scale parameters are stored as variances (sigma2_*), the shrinkage
//    and smoothing parameters as precisions (delta_*, lambda_*).
struct ModelState {
  Eigen::VectorXd gamma;  // transfer-coefficient curve basis weights (P)

  Eigen::MatrixXd theta;  // residual factor scores (L x n)
  Eigen::MatrixXd phi;    // residual loading weights (J x L)

  int lag = 0;            // reporting lag in days, in [0, max_lag]
  Eigen::VectorXd mu;     // exposure factor score means (K)
  Eigen::MatrixXd alpha;  // site deviations of the factor scores (K x n)
  Eigen::MatrixXd psi;    // exposure loading weights (H x K)

  double sigma2_eps_x = 1.0;
  double sigma2_eps_y = 1.0;
  Eigen::VectorXd sigma2_theta;  // CAR scale per residual factor (L)

  double lambda_gamma = 1.0;
  Eigen::VectorXd lambda_f;  // smoothing precision per exposure loading (K)
  Eigen::VectorXd lambda_g;  // smoothing precision per residual loading (L)

  // Multiplicative-gamma shrinkage: the score-mean prior precision for factor
  // k is prod_{h<=k} delta_mu[h], and likewise for the deviations.
  Eigen::VectorXd delta_mu;     // K
  Eigen::VectorXd delta_alpha;  // K
  Eigen::MatrixXd zeta;         // per-score t-tail mixing weights (K x n)
  double nu_alpha = 16.0;
  double a_mu1 = 2.0, a_mu2 = 2.0;
  double a_alpha1 = 2.0, a_alpha2 = 2.0;

  // Shrinkage-implied variances.
  double sigma2_mu(int k) const {
    double prec = 1.0;
    for (int h = 0; h <= k; ++h) prec *= delta_mu[h];
    return 1.0 / prec;
  }
  double sigma2_alpha(int k) const {
    double prec = 1.0;
    for (int h = 0; h <= k; ++h) prec *= delta_alpha[h];
    return 1.0 / prec;
  }

  // Factor scores of site i.
  Eigen::VectorXd beta(int i) const { return mu + alpha.col(i); }

  int num_sites() const { return static_cast<int>(theta.cols()); }

  void validate(const Hyperparams& hp, int n) const;
};

// Zero-initialized state with the dimensions implied by hp (resolved) and n.
ModelState make_state(const Hyperparams& hp, int n);

}  // namespace sfcr
