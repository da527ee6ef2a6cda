#pragma once

#include <functional>

#include "sfcr/model.hpp"
#include "sfcr/slice.hpp"

namespace sfcr {

// Per-chain sampling context: immutable problem data plus the per-site design
// caches every conditional reuses, and the chain's RNG.  One context per
// chain; nothing here is shared between chains.
struct GibbsContext {
  GibbsContext(const Dataset& data, const Hyperparams& hp, const Bases& bases,
               const SpatialGraph& graph, std::uint64_t seed);

  const Dataset* data;
  Hyperparams hp;  // resolved
  const Bases* bases;
  const SpatialGraph* graph;
  Rng rng;
  bool normalize_loadings;  // constrained draws + renormalization of loadings

  // Static per-site caches (independent of the state, including the lag).
  std::vector<Eigen::MatrixXd> b_y;    // gamma-basis rows at tau_y
  std::vector<Eigen::MatrixXd> v_y;    // residual-basis rows at tau_y
  std::vector<Eigen::MatrixXd> w_x;    // exposure-basis rows at tau_x (extended rows)
  std::vector<Eigen::MatrixXd> vtv_y;  // v_y' v_y
  std::vector<Eigen::MatrixXd> wtw_x;  // w_x' w_x
  Eigen::MatrixXd car_prec;            // graph Q + jitter I

  int n() const { return data->n(); }
  // Exposure-basis rows at site i's y days shifted by `lag` (gathered on
  // demand; the shift varies over the sampler's lag candidates).
  Eigen::MatrixXd w_y_shift(int i, int lag) const;
};

// ---- Full-conditional parameters (pure functions of the state) -------------
// These are the quantities the implementation draws from; tests verify each
// against the joint density on a grid (ratio test) and the draw primitives
// against their moments, which together pin the step functions down.

struct GaussianParams {
  Eigen::MatrixXd Q;  // precision
  Eigen::VectorXd l;  // linear term; the conditional is N(Q^-1 l, Q^-1)
};

struct ScalarGaussianParams {
  double prec = 0.0;
  double lin = 0.0;
};

struct GammaParams {
  double shape = 0.0;
  double rate = 0.0;
  double lower = 0.0;  // support truncation; 0 means untruncated
};

struct SliceTarget {
  std::function<double(double)> logdensity;
  double lower = 0.0;
  double upper = 0.0;
};

GaussianParams gamma_params(const ModelState& st, const GibbsContext& ctx);
GammaParams lambda_gamma_params(const ModelState& st, const GibbsContext& ctx);
GaussianParams theta_params(const ModelState& st, const GibbsContext& ctx, int l);
GaussianParams phi_params(const ModelState& st, const GibbsContext& ctx, int l);
GammaParams lambda_g_params(const ModelState& st, const GibbsContext& ctx, int l);
// Unnormalized log weights over lag candidates {0, ..., max_lag}.
Eigen::VectorXd lag_log_weights(const ModelState& st, const GibbsContext& ctx);
ScalarGaussianParams mu_params(const ModelState& st, const GibbsContext& ctx, int k);
ScalarGaussianParams alpha_params(const ModelState& st, const GibbsContext& ctx, int k, int i);
GaussianParams psi_params(const ModelState& st, const GibbsContext& ctx, int k);
GammaParams lambda_f_params(const ModelState& st, const GibbsContext& ctx, int k);
GammaParams delta_mu_params(const ModelState& st, const GibbsContext& ctx, int h);
GammaParams delta_alpha_params(const ModelState& st, const GibbsContext& ctx, int h);
GammaParams zeta_params(const ModelState& st, const GibbsContext& ctx, int k, int i);
GammaParams prec_x_params(const ModelState& st, const GibbsContext& ctx);
GammaParams prec_y_params(const ModelState& st, const GibbsContext& ctx);
GammaParams prec_theta_params(const ModelState& st, const GibbsContext& ctx, int l);
SliceTarget shape_mu1_target(const ModelState& st);
SliceTarget shape_mu2_target(const ModelState& st);
SliceTarget shape_alpha1_target(const ModelState& st);
SliceTarget shape_alpha2_target(const ModelState& st);
SliceTarget nu_target(const ModelState& st, const GibbsContext& ctx);

// Categorical draw by perturbing log weights with Gumbel noise and taking the
// argmax.
int gumbel_max_draw(const Eigen::VectorXd& log_weights, Rng& rng);

// ---- Sweep steps ------------------------------------------------------------
// Each mutates the state using ctx.rng.  Loading-curve steps draw the curve
// first and its smoothing precision second: the reverse order hits an
// improper precision conditional whenever the current curve happens to lie in
// the penalty nullspace (which initializers produce).

void step_gamma(ModelState& st, GibbsContext& ctx);      // gamma, lambda_gamma
void step_theta(ModelState& st, GibbsContext& ctx);      // theta rows
void step_phi(ModelState& st, GibbsContext& ctx);        // phi cols, lambda_g
void step_lag(ModelState& st, GibbsContext& ctx);        // lag
void step_factors(ModelState& st, GibbsContext& ctx);    // mu, alpha
void step_psi(ModelState& st, GibbsContext& ctx);        // psi cols, lambda_f
void step_mgp(ModelState& st, GibbsContext& ctx);        // delta_mu, delta_alpha, zeta
void step_variances(ModelState& st, GibbsContext& ctx);  // sigma2_eps_*, sigma2_theta
void step_shapes(ModelState& st, GibbsContext& ctx);     // a_*, nu_alpha (slice)

// One full Gibbs iteration, steps in the fixed order above.
void sweep(ModelState& st, GibbsContext& ctx);

}  // namespace sfcr
