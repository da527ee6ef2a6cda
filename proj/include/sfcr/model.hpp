#pragma once

#include "sfcr/basis.hpp"
#include "sfcr/data.hpp"
#include "sfcr/rng.hpp"
#include "sfcr/spatial.hpp"
#include "sfcr/state.hpp"

namespace sfcr {

// The three basis systems a fit works with.  gamma_sys and resid_sys are
// built on the modeling grid; exposure_sys on the extended grid, so that the
// latent exposure is defined through the lag lead-in.
struct Bases {
  Grid grid;
  BasisSystem gamma_sys;     // penalized B-spline, P columns
  BasisSystem resid_sys;     // orthonormal smoothness-graded basis, J columns
  BasisSystem exposure_sys;  // orthonormal low-rank spline basis, H columns
};

// Builds all three systems.  hp must be resolved();  hp.penalty_ridge, if
// positive, is added to each penalty diagonal and the penalty ranks become
// full (every curve prior proper).
Bases make_bases(const Grid& grid, const Hyperparams& hp);

// Log joint density of (data, state), split into the pieces tests and
// diagnostics want separately.  Conventions, fixed once here and mirrored by
// the independent oracle in the tests:
//  - likelihood terms keep their 2*pi constants;
//  - every prior term that varies with some state field is present: quadratic
//    forms and log-precision factors of the curve/score/CAR Gaussians, the
//    full Gamma log densities of the shrinkage chain and mixing weights
//    (their shapes are themselves parameters), the (a-1)log h - b h kernels
//    of the fixed-shape Gamma priors, -3/2 log lambda for the smoothing
//    precisions, log a - a for the shrinkage shape hyperpriors, and the
//    uniform-lag mass -log(max_lag + 1);
//  - constants that depend only on dimensions, bases, graph, or fixed
//    hyperparameters are dropped: prior 2*pi factors, penalty and CAR
//    (pseudo-)determinants, fixed Gamma normalizers, uniform densities of
//    the bounded scalars;
//  - states outside the prior support get -inf.
struct LogJointParts {
  double like_y = 0.0;
  double like_x = 0.0;
  double prior = 0.0;
  double total() const { return like_y + like_x + prior; }
};

LogJointParts log_joint(const ModelState& state, const Dataset& data, const Hyperparams& hp,
                        const Bases& bases, const SpatialGraph& graph);

// Curves implied by a state on the full grid (all sites, every day).
struct DerivedCurves {
  Eigen::VectorXd gamma_curve;    // M: transfer coefficient per day
  Eigen::MatrixXd loadings_x;     // ext x K: exposure loading functions
  Eigen::MatrixXd loadings_y;     // M x L: residual loading functions
  Eigen::MatrixXd exposure;       // ext x n: latent exposure per site
  Eigen::VectorXd exposure_mean;  // ext: shared exposure mean curve
  Eigen::MatrixXd resid;          // M x n: residual process per site
  Eigen::MatrixXd fitted_y;       // M x n: lag-shifted positivity mean
};

DerivedCurves derive_curves(const ModelState& state, const Bases& bases);

// Mean positivity for one site on the given main-grid days.
Eigen::VectorXd predict_y(const ModelState& state, const Bases& bases, int site,
                          const std::vector<int>& idx);

// Exact draw from the prior.  Requires hp.penalty_ridge > 0 (otherwise the
// curve priors are improper and no draw exists).
ModelState draw_from_prior(const Hyperparams& hp, int n, const Bases& bases,
                           const SpatialGraph& graph, Rng& rng);

}  // namespace sfcr
