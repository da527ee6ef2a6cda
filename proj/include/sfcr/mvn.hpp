#pragma once

#include <Eigen/Core>

#include "sfcr/rng.hpp"

namespace sfcr {

// Draw from the Gaussian with precision Q and linear term l, i.e.
// N(Q^-1 l, Q^-1), via Cholesky of Q.  If Q fails to factor, retries once
// with 1e-10 added to the diagonal, then throws SamplerError.
Eigen::VectorXd sample_gaussian_precision(const Eigen::MatrixXd& Q, const Eigen::VectorXd& l,
                                          Rng& rng);

// Same draw conditioned on the exact linear constraint C x = 0 (conditioning
// by kriging: draw unconstrained, then project).  C may have zero rows.
Eigen::VectorXd sample_gaussian_constrained(const Eigen::MatrixXd& Q, const Eigen::VectorXd& l,
                                            const Eigen::MatrixXd& C, Rng& rng);

}  // namespace sfcr
