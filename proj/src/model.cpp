#include "sfcr/model.hpp"

#include <cmath>
#include <limits>

#include "sfcr/mvn.hpp"

namespace sfcr {

Bases make_bases(const Grid& grid, const Hyperparams& hp) {
  grid.validate();
  hp.validate(grid);
  Bases b;
  b.grid = grid;
  b.gamma_sys = build_bspline(grid, hp.gamma_basis);
  b.resid_sys = build_demmler_reinsch(grid, hp.resid_basis);
  b.exposure_sys = build_lrtps(grid.extended(), hp.exposure_basis);
  if (hp.penalty_ridge > 0) {
    for (BasisSystem* s : {&b.gamma_sys, &b.resid_sys, &b.exposure_sys}) {
      s->penalty.diagonal().array() += hp.penalty_ridge;
      s->penalty_rank = s->rank;
    }
  }
  return b;
}

namespace {

// Nonsense states (nonpositive scales) are errors; positive states outside
// the bounded prior supports evaluate to -inf.
void check_positive(const ModelState& st) {
  bool ok = st.sigma2_eps_x > 0 && st.sigma2_eps_y > 0 && st.nu_alpha > 0;
  ok = ok && st.a_mu1 > 0 && st.a_mu2 > 0 && st.a_alpha1 > 0 && st.a_alpha2 > 0;
  ok = ok && st.lambda_gamma > 0;
  ok = ok && (st.lambda_f.array() > 0).all() && (st.lambda_g.array() > 0).all();
  ok = ok && (st.delta_mu.array() > 0).all() && (st.delta_alpha.array() > 0).all();
  ok = ok && (st.sigma2_theta.array() > 0).all() && (st.zeta.array() > 0).all();
  if (!ok) throw InputError("state", "log_joint: nonpositive variance or precision");
}

bool in_support(const ModelState& st, const Hyperparams& hp) {
  const double lam_lo = hp.lambda_lower();
  if (st.nu_alpha < hp.nu_lower || st.nu_alpha > hp.nu_upper) return false;
  if (st.lambda_gamma < lam_lo) return false;
  if ((st.lambda_f.array() < lam_lo).any() || (st.lambda_g.array() < lam_lo).any()) return false;
  return true;
}

// log Gamma(x; shape, rate) dropping the shape/rate normalizer (used where the
// shape and rate are fixed hyperparameters).
double gamma_kernel(double x, double shape, double rate) {
  return (shape - 1.0) * std::log(x) - rate * x;
}

// Full log Gamma(x; shape, 1) including the normalizer (used where the shape
// is itself a parameter).
double gamma_unit_rate(double x, double shape) {
  return (shape - 1.0) * std::log(x) - x - std::lgamma(shape);
}

}  // namespace

LogJointParts log_joint(const ModelState& state, const Dataset& data, const Hyperparams& hp,
                        const Bases& bases, const SpatialGraph& graph) {
  const int n = data.n();
  state.validate(hp, n);
  if (graph.size() != n) throw DimensionError("log_joint: graph/site count mismatch");
  const int K = hp.num_factors, L = hp.num_resid_factors;
  const int ext = bases.grid.extension;
  const double log_2pi = std::log(2.0 * M_PI);

  check_positive(state);
  LogJointParts out;
  if (!in_support(state, hp)) {
    out.prior = -std::numeric_limits<double>::infinity();
    return out;
  }

  const Eigen::VectorXd gamma_curve = bases.gamma_sys.eval * state.gamma;        // M
  const Eigen::MatrixXd G = bases.resid_sys.eval * state.phi;                    // M x L
  const Eigen::MatrixXd F = bases.exposure_sys.eval * state.psi;                 // ext x K
  const Eigen::MatrixXd scores = state.mu.replicate(1, n) + state.alpha;         // K x n
  const Eigen::MatrixXd X = F * scores;                                          // ext x n

  double ss_y = 0.0, ss_x = 0.0;
  int m_y = 0, m_x = 0;
  for (int i = 0; i < n; ++i) {
    const SiteSeries& sy = data.y[i];
    for (int j = 0; j < sy.count(); ++j) {
      const int t = sy.idx[j];
      const double mean = gamma_curve[t] * X(t + ext - state.lag, i) +
                          G.row(t).dot(state.theta.col(i));
      const double r = sy.values[j] - mean;
      ss_y += r * r;
    }
    m_y += sy.count();
    const SiteSeries& sx = data.x[i];
    for (int j = 0; j < sx.count(); ++j) {
      const double r = sx.values[j] - X(sx.idx[j] + ext, i);
      ss_x += r * r;
    }
    m_x += sx.count();
  }
  out.like_y = -0.5 * m_y * (log_2pi + std::log(state.sigma2_eps_y)) -
               ss_y / (2.0 * state.sigma2_eps_y);
  out.like_x = -0.5 * m_x * (log_2pi + std::log(state.sigma2_eps_x)) -
               ss_x / (2.0 * state.sigma2_eps_x);

  double prior = 0.0;

  // Penalized curve weights and their smoothing precisions.
  auto curve_terms = [&](const BasisSystem& sys, const Eigen::VectorXd& w, double lambda) {
    prior += 0.5 * sys.penalty_rank * std::log(lambda) -
             0.5 * lambda * w.dot(sys.penalty * w) - 1.5 * std::log(lambda);
  };
  curve_terms(bases.gamma_sys, state.gamma, state.lambda_gamma);
  for (int k = 0; k < K; ++k) curve_terms(bases.exposure_sys, state.psi.col(k), state.lambda_f[k]);
  for (int l = 0; l < L; ++l) curve_terms(bases.resid_sys, state.phi.col(l), state.lambda_g[l]);

  // Spatially smooth residual scores and their scales.
  for (int l = 0; l < L; ++l) {
    const double h = 1.0 / state.sigma2_theta[l];
    prior += 0.5 * n * std::log(h) - 0.5 * h * car_quadform(graph, state.theta.row(l).transpose());
    prior += gamma_kernel(h, hp.a_theta, hp.b_theta);
  }

  // Factor scores under the multiplicative-gamma / t-tail prior.
  double prec_mu = 1.0, prec_al = 1.0;
  const double half_nu = 0.5 * state.nu_alpha;
  for (int k = 0; k < K; ++k) {
    prec_mu *= state.delta_mu[k];
    prec_al *= state.delta_alpha[k];
    prior += 0.5 * std::log(prec_mu) - 0.5 * prec_mu * state.mu[k] * state.mu[k];
    for (int i = 0; i < n; ++i) {
      const double z = state.zeta(k, i);
      prior += 0.5 * std::log(z * prec_al) -
               0.5 * z * prec_al * state.alpha(k, i) * state.alpha(k, i);
      prior += half_nu * std::log(half_nu) - std::lgamma(half_nu) +
               (half_nu - 1.0) * std::log(z) - half_nu * z;
    }
    prior += gamma_unit_rate(state.delta_mu[k], k == 0 ? state.a_mu1 : state.a_mu2);
    prior += gamma_unit_rate(state.delta_alpha[k], k == 0 ? state.a_alpha1 : state.a_alpha2);
  }
  for (double a : {state.a_mu1, state.a_mu2, state.a_alpha1, state.a_alpha2})
    prior += std::log(a) - a;

  // Error precisions and the uniform lag.
  prior += gamma_kernel(1.0 / state.sigma2_eps_x, hp.a_eps_x, hp.b_eps_x);
  prior += gamma_kernel(1.0 / state.sigma2_eps_y, hp.a_eps_y, hp.b_eps_y);
  prior -= std::log(static_cast<double>(hp.max_lag + 1));

  out.prior = prior;
  return out;
}

DerivedCurves derive_curves(const ModelState& state, const Bases& bases) {
  const int n = state.num_sites();
  const int M = bases.grid.size();
  const int ext = bases.grid.extension;
  DerivedCurves c;
  c.gamma_curve = bases.gamma_sys.eval * state.gamma;
  c.loadings_x = bases.exposure_sys.eval * state.psi;
  c.loadings_y = bases.resid_sys.eval * state.phi;
  c.exposure = c.loadings_x * (state.mu.replicate(1, n) + state.alpha);
  c.exposure_mean = c.loadings_x * state.mu;
  c.resid = c.loadings_y * state.theta;
  c.fitted_y.resize(M, n);
  for (int t = 0; t < M; ++t)
    c.fitted_y.row(t) =
        c.gamma_curve[t] * c.exposure.row(t + ext - state.lag) + c.resid.row(t);
  return c;
}

Eigen::VectorXd predict_y(const ModelState& state, const Bases& bases, int site,
                          const std::vector<int>& idx) {
  if (site < 0 || site >= state.num_sites()) throw DimensionError("predict_y: site out of range");
  const int ext = bases.grid.extension;
  const Eigen::VectorXd gamma_curve = bases.gamma_sys.eval * state.gamma;
  const Eigen::VectorXd X = bases.exposure_sys.eval * (state.psi * state.beta(site));
  const Eigen::VectorXd resid = bases.resid_sys.eval * (state.phi * state.theta.col(site));
  Eigen::VectorXd out(idx.size());
  for (size_t j = 0; j < idx.size(); ++j) {
    const int t = idx[j];
    if (t < 0 || t >= bases.grid.size()) throw DimensionError("predict_y: day index out of grid");
    out[j] = gamma_curve[t] * X[t + ext - state.lag] + resid[t];
  }
  return out;
}

ModelState draw_from_prior(const Hyperparams& hp, int n, const Bases& bases,
                           const SpatialGraph& graph, Rng& rng) {
  if (!(hp.penalty_ridge > 0))
    throw ConfigError("prior", "prior draws need penalty_ridge > 0 (proper curve priors)");
  if (graph.size() != n) throw DimensionError("draw_from_prior: graph/site count mismatch");
  const int K = hp.num_factors, L = hp.num_resid_factors;
  ModelState st = make_state(hp, n);

  st.a_mu1 = rng.gamma(2.0, 1.0);
  st.a_mu2 = rng.gamma(2.0, 1.0);
  st.a_alpha1 = rng.gamma(2.0, 1.0);
  st.a_alpha2 = rng.gamma(2.0, 1.0);
  for (int k = 0; k < K; ++k) {
    st.delta_mu[k] = rng.gamma(k == 0 ? st.a_mu1 : st.a_mu2, 1.0);
    st.delta_alpha[k] = rng.gamma(k == 0 ? st.a_alpha1 : st.a_alpha2, 1.0);
  }
  st.nu_alpha = rng.uniform(hp.nu_lower, hp.nu_upper);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i) st.zeta(k, i) = rng.gamma(0.5 * st.nu_alpha, 0.5 * st.nu_alpha);
  for (int k = 0; k < K; ++k) {
    st.mu[k] = rng.normal(0.0, std::sqrt(st.sigma2_mu(k)));
    const double sd_base = std::sqrt(st.sigma2_alpha(k));
    for (int i = 0; i < n; ++i) st.alpha(k, i) = rng.normal(0.0, sd_base / std::sqrt(st.zeta(k, i)));
  }

  auto draw_lambda = [&]() {
    double u = 0.0;
    while (u <= 0.0) u = rng.uniform(0.0, hp.lambda_half_upper);  // u = lambda^{-1/2}
    return 1.0 / (u * u);
  };
  st.lambda_gamma = draw_lambda();
  for (int k = 0; k < K; ++k) st.lambda_f[k] = draw_lambda();
  for (int l = 0; l < L; ++l) st.lambda_g[l] = draw_lambda();

  const Eigen::VectorXd zero_g = Eigen::VectorXd::Zero(hp.gamma_basis);
  st.gamma = sample_gaussian_precision(st.lambda_gamma * bases.gamma_sys.penalty, zero_g, rng);
  const Eigen::VectorXd zero_w = Eigen::VectorXd::Zero(hp.exposure_basis);
  for (int k = 0; k < K; ++k)
    st.psi.col(k) = sample_gaussian_precision(st.lambda_f[k] * bases.exposure_sys.penalty, zero_w, rng);
  const Eigen::VectorXd zero_v = Eigen::VectorXd::Zero(hp.resid_basis);
  for (int l = 0; l < L; ++l)
    st.phi.col(l) = sample_gaussian_precision(st.lambda_g[l] * bases.resid_sys.penalty, zero_v, rng);

  Eigen::MatrixXd car_prec = graph.Q;
  car_prec.diagonal().array() += graph.jitter;
  const Eigen::VectorXd zero_n = Eigen::VectorXd::Zero(n);
  for (int l = 0; l < L; ++l) {
    st.sigma2_theta[l] = 1.0 / rng.gamma(hp.a_theta, hp.b_theta);
    st.theta.row(l) =
        sample_gaussian_precision(car_prec / st.sigma2_theta[l], zero_n, rng).transpose();
  }

  st.sigma2_eps_x = 1.0 / rng.gamma(hp.a_eps_x, hp.b_eps_x);
  st.sigma2_eps_y = 1.0 / rng.gamma(hp.a_eps_y, hp.b_eps_y);
  st.lag = rng.integer(hp.max_lag + 1);
  return st;
}

}  // namespace sfcr
