#pragma once

#include <cmath>

#include "sfcr/grid.hpp"

namespace sfcr {

// Model dimensions and fixed prior settings.  Zeros for gamma_basis /
// resid_basis mean "derive from the grid" (resolved()).
struct Hyperparams {
  int num_factors = 8;        // exposure factors K
  int num_resid_factors = 4;  // residual-process factors L
  int gamma_basis = 0;        // coefficient-curve B-spline size P; 0 -> ceil(M/30)
  int exposure_basis = 20;    // exposure loading basis size H
  int resid_basis = 0;        // residual loading basis size J; 0 -> min(30, M)
  int max_lag = 21;           // largest candidate reporting lag (days)

  double a_eps_x = 0.01, b_eps_x = 0.01;  // Gamma prior on the x error precision
  double a_eps_y = 0.01, b_eps_y = 0.01;  // Gamma prior on the y error precision
  double a_theta = 0.01, b_theta = 0.01;  // Gamma prior on the CAR scale precisions

  // Uniform(0, lambda_half_upper) prior on each smoothing precision's inverse
  // square root, i.e. lambda >= lambda_half_upper^-2.
  double lambda_half_upper = 1e4;
  double nu_lower = 2.0, nu_upper = 128.0;  // uniform bounds for the t-tail df

  // Optional ridge added to every basis penalty; makes the curve priors
  // proper (used by prior-simulation consumers), zero in normal fits.
  double penalty_ridge = 0.0;

  // Keep loading curves orthonormal via constrained draws + renormalization.
  bool orthonormal_loadings = true;

  double slice_width = 1.0;
  int slice_max_stepout = 50;

  Hyperparams resolved(const Grid& grid) const {
    Hyperparams out = *this;
    if (out.gamma_basis == 0)
      out.gamma_basis = static_cast<int>(std::ceil(grid.size() / 30.0));
    if (out.gamma_basis < 4) out.gamma_basis = 4;
    if (out.resid_basis == 0) out.resid_basis = std::min(30, grid.size());
    return out;
  }

  void validate(const Grid& grid) const {
    if (num_factors < 1 || num_resid_factors < 1)
      throw ConfigError("factors", "factor counts must be positive");
    if (max_lag < 0) throw ConfigError("lag", "max_lag must be nonnegative");
    if (grid.extension < max_lag)
      throw ConfigError("extension", "grid extension must cover max_lag");
    if (gamma_basis == 0 || resid_basis == 0)
      throw ConfigError("basis", "call resolved() before validate()");
    if (num_factors > exposure_basis)
      throw ConfigError("factors", "num_factors cannot exceed the exposure basis size");
    if (num_resid_factors > resid_basis)
      throw ConfigError("factors", "num_resid_factors cannot exceed the residual basis size");
    if (a_eps_x <= 0 || b_eps_x <= 0 || a_eps_y <= 0 || b_eps_y <= 0 || a_theta <= 0 ||
        b_theta <= 0)
      throw ConfigError("prior", "Gamma prior parameters must be positive");
    if (lambda_half_upper <= 0) throw ConfigError("prior", "lambda_half_upper must be positive");
    if (!(nu_lower >= 2.0) || !(nu_upper > nu_lower))
      throw ConfigError("prior", "need 2 <= nu_lower < nu_upper");
    if (penalty_ridge < 0) throw ConfigError("prior", "penalty_ridge must be nonnegative");
  }

  double lambda_lower() const { return 1.0 / (lambda_half_upper * lambda_half_upper); }
};

}  // namespace sfcr
