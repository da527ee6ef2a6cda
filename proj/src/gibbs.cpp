#include "sfcr/gibbs.hpp"

#include <cmath>
#include <limits>

#include "sfcr/mvn.hpp"

namespace sfcr {

GibbsContext::GibbsContext(const Dataset& data_in, const Hyperparams& hp_in,
                           const Bases& bases_in, const SpatialGraph& graph_in,
                           std::uint64_t seed)
    : data(&data_in),
      hp(hp_in),
      bases(&bases_in),
      graph(&graph_in),
      rng(seed),
      normalize_loadings(hp_in.orthonormal_loadings) {
  data_in.validate(false);
  hp.validate(data_in.grid);
  const Grid& g = data_in.grid;
  if (bases_in.grid.start_day != g.start_day || bases_in.grid.num_days != g.num_days ||
      bases_in.grid.extension != g.extension)
    throw DimensionError("gibbs: bases were built on a different grid");
  if (bases_in.gamma_sys.rank != hp.gamma_basis || bases_in.resid_sys.rank != hp.resid_basis ||
      bases_in.exposure_sys.rank != hp.exposure_basis)
    throw DimensionError("gibbs: basis sizes do not match the hyperparameters");
  if (graph_in.size() != data_in.n()) throw DimensionError("gibbs: graph/site count mismatch");
  if (graph_in.ids != data_in.site_ids)
    throw InputError("graph", "gibbs: graph and dataset site ids disagree");
  for (const BasisSystem* s : {&bases_in.gamma_sys, &bases_in.resid_sys, &bases_in.exposure_sys})
    if (s->penalty_rank < 2)
      throw ConfigError("basis",
                        "gibbs: smoothing-precision conditionals need penalty rank >= 2");

  const int n = data_in.n();
  const int ext = g.extension;
  const Grid extended = g.extended();
  b_y.resize(n);
  v_y.resize(n);
  w_x.resize(n);
  vtv_y.resize(n);
  wtw_x.resize(n);
  for (int i = 0; i < n; ++i) {
    b_y[i] = evaluate_subset(bases_in.gamma_sys, g, data_in.y[i].idx);
    v_y[i] = evaluate_subset(bases_in.resid_sys, g, data_in.y[i].idx);
    std::vector<int> xr(data_in.x[i].idx);
    for (int& t : xr) t += ext;
    w_x[i] = evaluate_subset(bases_in.exposure_sys, extended, xr);
    vtv_y[i] = v_y[i].transpose() * v_y[i];
    wtw_x[i] = w_x[i].transpose() * w_x[i];
  }
  car_prec = graph_in.Q;
  car_prec.diagonal().array() += graph_in.jitter;
}

Eigen::MatrixXd GibbsContext::w_y_shift(int i, int lag) const {
  if (lag < 0 || lag > hp.max_lag) throw DimensionError("gibbs: lag outside [0, max_lag]");
  const int ext = data->grid.extension;
  std::vector<int> rows(data->y[i].idx);
  for (int& t : rows) t += ext - lag;
  return evaluate_subset(bases->exposure_sys, data->grid.extended(), rows);
}

namespace {

// ---- Current-state curves and residuals at the observed rows ---------------

Eigen::VectorXd gamma_at_y(const ModelState& st, const GibbsContext& ctx, int i) {
  return ctx.b_y[i] * st.gamma;
}

Eigen::VectorXd resid_curve_at_y(const ModelState& st, const GibbsContext& ctx, int i) {
  return ctx.v_y[i] * (st.phi * st.theta.col(i));
}

// Latent exposure at site i's y rows, shifted by `lag`.
Eigen::VectorXd exposure_at_y(const ModelState& st, const GibbsContext& ctx, int i, int lag) {
  return ctx.w_y_shift(i, lag) * (st.psi * st.beta(i));
}

Eigen::VectorXd exposure_at_x(const ModelState& st, const GibbsContext& ctx, int i) {
  return ctx.w_x[i] * (st.psi * st.beta(i));
}

// y_i minus the full current fit (transfer term at the current lag plus the
// residual process).
Eigen::VectorXd resid_y(const ModelState& st, const GibbsContext& ctx, int i) {
  return ctx.data->y[i].values -
         (gamma_at_y(st, ctx, i).cwiseProduct(exposure_at_y(st, ctx, i, st.lag)) +
          resid_curve_at_y(st, ctx, i));
}

Eigen::VectorXd resid_x(const ModelState& st, const GibbsContext& ctx, int i) {
  return ctx.data->x[i].values - exposure_at_x(st, ctx, i);
}

// Smoothing-precision conditional for a penalized curve: the joint density's
// lambda terms are (penalty_rank/2 - 3/2) log lambda - (w'P w / 2) lambda on
// [lambda_lower, inf).
GammaParams lambda_params(const BasisSystem& sys, const Eigen::VectorXd& w,
                          const Hyperparams& hp) {
  GammaParams p;
  p.shape = 0.5 * (sys.penalty_rank - 1);
  p.rate = 0.5 * w.dot(sys.penalty * w);
  p.lower = hp.lambda_lower();
  return p;
}

double draw_gamma_maybe_truncated(const GammaParams& p, Rng& rng) {
  if (p.lower > 0.0) return truncated_gamma(p.shape, p.rate, p.lower, rng);
  return rng.gamma(p.shape, p.rate);
}

// Normalizes a freshly drawn loading-coefficient vector to unit norm and
// returns the norm (the caller rescales the paired scores, which keeps the
// loading-times-score product a draw from the unnormalized conditional).
double unit_normalize(Eigen::VectorXd& w) {
  const double nrm = w.norm();
  if (!(nrm > 0.0)) throw SamplerError("normalize", "degenerate loading draw (zero norm)");
  w /= nrm;
  return nrm;
}

// Rows of C are the other loading columns: because the basis evaluations have
// orthonormal columns, coefficient orthogonality is exactly curve
// orthogonality over the grid.
Eigen::MatrixXd orthogonality_rows(const Eigen::MatrixXd& loadings, int skip) {
  const int m = static_cast<int>(loadings.cols());
  Eigen::MatrixXd C(m - 1, loadings.rows());
  int r = 0;
  for (int j = 0; j < m; ++j)
    if (j != skip) C.row(r++) = loadings.col(j).transpose();
  return C;
}

}  // namespace

// ---- Full-conditional parameters -------------------------------------------

GaussianParams gamma_params(const ModelState& st, const GibbsContext& ctx) {
  const double h_y = 1.0 / st.sigma2_eps_y;
  GaussianParams p;
  p.Q = st.lambda_gamma * ctx.bases->gamma_sys.penalty;
  p.l = Eigen::VectorXd::Zero(ctx.hp.gamma_basis);
  for (int i = 0; i < ctx.n(); ++i) {
    const Eigen::MatrixXd D =
        exposure_at_y(st, ctx, i, st.lag).asDiagonal() * ctx.b_y[i];
    const Eigen::VectorXd r = ctx.data->y[i].values - resid_curve_at_y(st, ctx, i);
    p.Q.noalias() += h_y * D.transpose() * D;
    p.l.noalias() += h_y * D.transpose() * r;
  }
  return p;
}

GammaParams lambda_gamma_params(const ModelState& st, const GibbsContext& ctx) {
  return lambda_params(ctx.bases->gamma_sys, st.gamma, ctx.hp);
}

GaussianParams theta_params(const ModelState& st, const GibbsContext& ctx, int l) {
  const double h_y = 1.0 / st.sigma2_eps_y;
  GaussianParams p;
  p.Q = ctx.car_prec / st.sigma2_theta[l];
  p.l = Eigen::VectorXd::Zero(ctx.n());
  for (int i = 0; i < ctx.n(); ++i) {
    const Eigen::VectorXd gv = ctx.v_y[i] * st.phi.col(l);
    const Eigen::VectorXd r = resid_y(st, ctx, i) + gv * st.theta(l, i);
    p.Q(i, i) += h_y * gv.squaredNorm();
    p.l[i] = h_y * gv.dot(r);
  }
  return p;
}

GaussianParams phi_params(const ModelState& st, const GibbsContext& ctx, int l) {
  const double h_y = 1.0 / st.sigma2_eps_y;
  GaussianParams p;
  p.Q = st.lambda_g[l] * ctx.bases->resid_sys.penalty;
  p.l = Eigen::VectorXd::Zero(ctx.hp.resid_basis);
  for (int i = 0; i < ctx.n(); ++i) {
    const double th = st.theta(l, i);
    const Eigen::VectorXd r = resid_y(st, ctx, i) + (ctx.v_y[i] * st.phi.col(l)) * th;
    p.Q.noalias() += (h_y * th * th) * ctx.vtv_y[i];
    p.l.noalias() += (h_y * th) * (ctx.v_y[i].transpose() * r);
  }
  return p;
}

GammaParams lambda_g_params(const ModelState& st, const GibbsContext& ctx, int l) {
  return lambda_params(ctx.bases->resid_sys, st.phi.col(l), ctx.hp);
}

Eigen::VectorXd lag_log_weights(const ModelState& st, const GibbsContext& ctx) {
  const int ext = ctx.data->grid.extension;
  const double h_y = 1.0 / st.sigma2_eps_y;
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(ctx.hp.max_lag + 1);
  for (int i = 0; i < ctx.n(); ++i) {
    const Eigen::VectorXd X = ctx.bases->exposure_sys.eval * (st.psi * st.beta(i));
    const Eigen::VectorXd gd = gamma_at_y(st, ctx, i);
    const Eigen::VectorXd base = ctx.data->y[i].values - resid_curve_at_y(st, ctx, i);
    const std::vector<int>& idx = ctx.data->y[i].idx;
    for (int s = 0; s <= ctx.hp.max_lag; ++s) {
      double acc = 0.0;
      for (size_t j = 0; j < idx.size(); ++j) {
        const double r = base[j] - gd[j] * X[idx[j] + ext - s];
        acc += r * r;
      }
      ss[s] += acc;
    }
  }
  return -0.5 * h_y * ss;
}

ScalarGaussianParams mu_params(const ModelState& st, const GibbsContext& ctx, int k) {
  const double h_y = 1.0 / st.sigma2_eps_y;
  const double h_x = 1.0 / st.sigma2_eps_x;
  ScalarGaussianParams p;
  p.prec = 1.0 / st.sigma2_mu(k);
  for (int i = 0; i < ctx.n(); ++i) {
    const Eigen::VectorXd fy =
        gamma_at_y(st, ctx, i).cwiseProduct(ctx.w_y_shift(i, st.lag) * st.psi.col(k));
    const Eigen::VectorXd fx = ctx.w_x[i] * st.psi.col(k);
    const Eigen::VectorXd ry = resid_y(st, ctx, i) + fy * st.mu[k];
    const Eigen::VectorXd rx = resid_x(st, ctx, i) + fx * st.mu[k];
    p.prec += h_y * fy.squaredNorm() + h_x * fx.squaredNorm();
    p.lin += h_y * fy.dot(ry) + h_x * fx.dot(rx);
  }
  return p;
}

ScalarGaussianParams alpha_params(const ModelState& st, const GibbsContext& ctx, int k, int i) {
  const double h_y = 1.0 / st.sigma2_eps_y;
  const double h_x = 1.0 / st.sigma2_eps_x;
  const Eigen::VectorXd fy =
      gamma_at_y(st, ctx, i).cwiseProduct(ctx.w_y_shift(i, st.lag) * st.psi.col(k));
  const Eigen::VectorXd fx = ctx.w_x[i] * st.psi.col(k);
  const Eigen::VectorXd ry = resid_y(st, ctx, i) + fy * st.alpha(k, i);
  const Eigen::VectorXd rx = resid_x(st, ctx, i) + fx * st.alpha(k, i);
  ScalarGaussianParams p;
  p.prec = st.zeta(k, i) / st.sigma2_alpha(k) + h_y * fy.squaredNorm() + h_x * fx.squaredNorm();
  p.lin = h_y * fy.dot(ry) + h_x * fx.dot(rx);
  return p;
}

GaussianParams psi_params(const ModelState& st, const GibbsContext& ctx, int k) {
  const double h_y = 1.0 / st.sigma2_eps_y;
  const double h_x = 1.0 / st.sigma2_eps_x;
  GaussianParams p;
  p.Q = st.lambda_f[k] * ctx.bases->exposure_sys.penalty;
  p.l = Eigen::VectorXd::Zero(ctx.hp.exposure_basis);
  for (int i = 0; i < ctx.n(); ++i) {
    const double b = st.mu[k] + st.alpha(k, i);
    const Eigen::MatrixXd Gy = gamma_at_y(st, ctx, i).asDiagonal() * ctx.w_y_shift(i, st.lag);
    const Eigen::VectorXd ry = resid_y(st, ctx, i) + (Gy * st.psi.col(k)) * b;
    const Eigen::VectorXd rx = resid_x(st, ctx, i) + (ctx.w_x[i] * st.psi.col(k)) * b;
    p.Q.noalias() += (h_y * b * b) * (Gy.transpose() * Gy);
    p.Q.noalias() += (h_x * b * b) * ctx.wtw_x[i];
    p.l.noalias() += (h_y * b) * (Gy.transpose() * ry);
    p.l.noalias() += (h_x * b) * (ctx.w_x[i].transpose() * rx);
  }
  return p;
}

GammaParams lambda_f_params(const ModelState& st, const GibbsContext& ctx, int k) {
  return lambda_params(ctx.bases->exposure_sys, st.psi.col(k), ctx.hp);
}

GammaParams delta_mu_params(const ModelState& st, const GibbsContext& ctx, int h) {
  const int K = ctx.hp.num_factors;
  GammaParams p;
  p.shape = (h == 0 ? st.a_mu1 : st.a_mu2) + 0.5 * (K - h);
  double acc = 0.0;
  double eta = 1.0;  // prod_{j <= k, j != h} delta_mu[j], built up over k
  for (int k = 0; k < K; ++k) {
    if (k != h) eta *= st.delta_mu[k];
    if (k >= h) acc += eta * st.mu[k] * st.mu[k];
  }
  p.rate = 1.0 + 0.5 * acc;
  return p;
}

GammaParams delta_alpha_params(const ModelState& st, const GibbsContext& ctx, int h) {
  const int K = ctx.hp.num_factors;
  const int n = ctx.n();
  GammaParams p;
  p.shape = (h == 0 ? st.a_alpha1 : st.a_alpha2) + 0.5 * n * (K - h);
  double acc = 0.0;
  double eta = 1.0;
  for (int k = 0; k < K; ++k) {
    if (k != h) eta *= st.delta_alpha[k];
    if (k >= h) {
      double w = 0.0;
      for (int i = 0; i < n; ++i) w += st.zeta(k, i) * st.alpha(k, i) * st.alpha(k, i);
      acc += eta * w;
    }
  }
  p.rate = 1.0 + 0.5 * acc;
  return p;
}

GammaParams zeta_params(const ModelState& st, const GibbsContext&, int k, int i) {
  GammaParams p;
  p.shape = 0.5 * (st.nu_alpha + 1.0);
  p.rate = 0.5 * (st.nu_alpha + st.alpha(k, i) * st.alpha(k, i) / st.sigma2_alpha(k));
  return p;
}

GammaParams prec_x_params(const ModelState& st, const GibbsContext& ctx) {
  GammaParams p;
  p.shape = ctx.hp.a_eps_x;
  p.rate = ctx.hp.b_eps_x;
  for (int i = 0; i < ctx.n(); ++i) {
    p.shape += 0.5 * ctx.data->x[i].count();
    p.rate += 0.5 * resid_x(st, ctx, i).squaredNorm();
  }
  return p;
}

GammaParams prec_y_params(const ModelState& st, const GibbsContext& ctx) {
  GammaParams p;
  p.shape = ctx.hp.a_eps_y;
  p.rate = ctx.hp.b_eps_y;
  for (int i = 0; i < ctx.n(); ++i) {
    p.shape += 0.5 * ctx.data->y[i].count();
    p.rate += 0.5 * resid_y(st, ctx, i).squaredNorm();
  }
  return p;
}

GammaParams prec_theta_params(const ModelState& st, const GibbsContext& ctx, int l) {
  const Eigen::VectorXd row = st.theta.row(l).transpose();
  GammaParams p;
  p.shape = ctx.hp.a_theta + 0.5 * ctx.n();
  p.rate = ctx.hp.b_theta + 0.5 * row.dot(ctx.car_prec * row);
  return p;
}

namespace {

// Shared form of the shrinkage-shape conditionals: Gamma(2, 1) hyperprior
// kernel log a - a plus `count` unit-rate Gamma likelihood terms whose log
// values sum to `sum_log`.
SliceTarget shape_target(double sum_log, int count) {
  SliceTarget t;
  t.logdensity = [sum_log, count](double a) {
    return (a - 1.0) * sum_log - count * std::lgamma(a) + std::log(a) - a;
  };
  t.lower = 0.0;
  t.upper = std::numeric_limits<double>::infinity();
  return t;
}

double tail_log_sum(const Eigen::VectorXd& v) {
  double s = 0.0;
  for (int k = 1; k < v.size(); ++k) s += std::log(v[k]);
  return s;
}

}  // namespace

SliceTarget shape_mu1_target(const ModelState& st) {
  return shape_target(std::log(st.delta_mu[0]), 1);
}

SliceTarget shape_mu2_target(const ModelState& st) {
  return shape_target(tail_log_sum(st.delta_mu), static_cast<int>(st.delta_mu.size()) - 1);
}

SliceTarget shape_alpha1_target(const ModelState& st) {
  return shape_target(std::log(st.delta_alpha[0]), 1);
}

SliceTarget shape_alpha2_target(const ModelState& st) {
  return shape_target(tail_log_sum(st.delta_alpha), static_cast<int>(st.delta_alpha.size()) - 1);
}

SliceTarget nu_target(const ModelState& st, const GibbsContext& ctx) {
  const double count = static_cast<double>(st.zeta.size());
  const double mix_sum = (st.zeta.array().log() - st.zeta.array()).sum();
  SliceTarget t;
  t.logdensity = [count, mix_sum](double nu) {
    const double half = 0.5 * nu;
    return half * mix_sum + count * (half * std::log(half) - std::lgamma(half));
  };
  t.lower = ctx.hp.nu_lower;
  t.upper = ctx.hp.nu_upper;
  return t;
}

int gumbel_max_draw(const Eigen::VectorXd& log_weights, Rng& rng) {
  if (log_weights.size() == 0) throw SamplerError("categorical", "empty weight vector");
  int best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < log_weights.size(); ++s) {
    const double v = log_weights[s] + rng.gumbel();
    if (v > best_value) {
      best_value = v;
      best = s;
    }
  }
  return best;
}

// ---- Sweep steps ------------------------------------------------------------

void step_gamma(ModelState& st, GibbsContext& ctx) {
  const GaussianParams p = gamma_params(st, ctx);
  st.gamma = sample_gaussian_precision(p.Q, p.l, ctx.rng);
  const GammaParams lp = lambda_gamma_params(st, ctx);
  st.lambda_gamma = draw_gamma_maybe_truncated(lp, ctx.rng);
}

void step_theta(ModelState& st, GibbsContext& ctx) {
  for (int l = 0; l < ctx.hp.num_resid_factors; ++l) {
    const GaussianParams p = theta_params(st, ctx, l);
    st.theta.row(l) = sample_gaussian_precision(p.Q, p.l, ctx.rng).transpose();
  }
}

void step_phi(ModelState& st, GibbsContext& ctx) {
  for (int l = 0; l < ctx.hp.num_resid_factors; ++l) {
    const GaussianParams p = phi_params(st, ctx, l);
    if (ctx.normalize_loadings) {
      Eigen::VectorXd draw =
          sample_gaussian_constrained(p.Q, p.l, orthogonality_rows(st.phi, l), ctx.rng);
      const double nrm = unit_normalize(draw);
      st.phi.col(l) = draw;
      st.theta.row(l) *= nrm;
    } else {
      st.phi.col(l) = sample_gaussian_precision(p.Q, p.l, ctx.rng);
    }
    const GammaParams lp = lambda_g_params(st, ctx, l);
    st.lambda_g[l] = draw_gamma_maybe_truncated(lp, ctx.rng);
  }
}

void step_lag(ModelState& st, GibbsContext& ctx) {
  st.lag = gumbel_max_draw(lag_log_weights(st, ctx), ctx.rng);
}

void step_factors(ModelState& st, GibbsContext& ctx) {
  const int K = ctx.hp.num_factors;
  const int n = ctx.n();
  const double h_y = 1.0 / st.sigma2_eps_y;
  const double h_x = 1.0 / st.sigma2_eps_x;

  // Per-site designs for all factors at once, and running residuals that are
  // updated after every scalar draw so each conditional sees the current
  // state without a from-scratch refit.
  std::vector<Eigen::MatrixXd> py(n), px(n);
  std::vector<Eigen::VectorXd> e_y(n), e_x(n);
  for (int i = 0; i < n; ++i) {
    py[i] = gamma_at_y(st, ctx, i).asDiagonal() * (ctx.w_y_shift(i, st.lag) * st.psi);
    px[i] = ctx.w_x[i] * st.psi;
    e_y[i] = ctx.data->y[i].values - (py[i] * st.beta(i) + resid_curve_at_y(st, ctx, i));
    e_x[i] = ctx.data->x[i].values - px[i] * st.beta(i);
  }

  auto scalar_draw = [&ctx](double prec, double lin) {
    if (!(prec > 0.0) || !std::isfinite(prec))
      throw SamplerError("precision", "score conditional has nonpositive precision");
    return ctx.rng.normal(lin / prec, std::sqrt(1.0 / prec));
  };

  // All score means first, then all site deviations (fixed scan order for
  // reproducibility; any fixed order is a valid Gibbs kernel).
  for (int k = 0; k < K; ++k) {
    double prec = 1.0 / st.sigma2_mu(k);
    double lin = 0.0;
    for (int i = 0; i < n; ++i) {
      prec += h_y * py[i].col(k).squaredNorm() + h_x * px[i].col(k).squaredNorm();
      lin += h_y * py[i].col(k).dot(e_y[i] + py[i].col(k) * st.mu[k]) +
             h_x * px[i].col(k).dot(e_x[i] + px[i].col(k) * st.mu[k]);
    }
    const double mu_new = scalar_draw(prec, lin);
    for (int i = 0; i < n; ++i) {
      e_y[i] -= py[i].col(k) * (mu_new - st.mu[k]);
      e_x[i] -= px[i].col(k) * (mu_new - st.mu[k]);
    }
    st.mu[k] = mu_new;
  }

  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i) {
      const double a_prec = st.zeta(k, i) / st.sigma2_alpha(k) +
                            h_y * py[i].col(k).squaredNorm() +
                            h_x * px[i].col(k).squaredNorm();
      const double a_lin = h_y * py[i].col(k).dot(e_y[i] + py[i].col(k) * st.alpha(k, i)) +
                           h_x * px[i].col(k).dot(e_x[i] + px[i].col(k) * st.alpha(k, i));
      const double a_new = scalar_draw(a_prec, a_lin);
      e_y[i] -= py[i].col(k) * (a_new - st.alpha(k, i));
      e_x[i] -= px[i].col(k) * (a_new - st.alpha(k, i));
      st.alpha(k, i) = a_new;
    }
}

void step_psi(ModelState& st, GibbsContext& ctx) {
  const int K = ctx.hp.num_factors;
  const int n = ctx.n();
  const double h_y = 1.0 / st.sigma2_eps_y;
  const double h_x = 1.0 / st.sigma2_eps_x;

  // The y-side Gram matrix of each site depends only on the transfer curve
  // and the lag, both fixed inside this step, so build it once; residuals are
  // kept running across the factor loop.
  std::vector<Eigen::MatrixXd> gy(n), a_gram(n);
  std::vector<Eigen::VectorXd> e_y(n), e_x(n);
  for (int i = 0; i < n; ++i) {
    gy[i] = gamma_at_y(st, ctx, i).asDiagonal() * ctx.w_y_shift(i, st.lag);
    a_gram[i] = gy[i].transpose() * gy[i];
    e_y[i] = ctx.data->y[i].values -
             (gy[i] * (st.psi * st.beta(i)) + resid_curve_at_y(st, ctx, i));
    e_x[i] = ctx.data->x[i].values - ctx.w_x[i] * (st.psi * st.beta(i));
  }

  for (int k = 0; k < K; ++k) {
    GaussianParams p;
    p.Q = st.lambda_f[k] * ctx.bases->exposure_sys.penalty;
    p.l = Eigen::VectorXd::Zero(ctx.hp.exposure_basis);
    for (int i = 0; i < n; ++i) {
      const double b = st.mu[k] + st.alpha(k, i);
      p.Q.noalias() += (h_y * b * b) * a_gram[i];
      p.Q.noalias() += (h_x * b * b) * ctx.wtw_x[i];
      p.l.noalias() += (h_y * b) * (gy[i].transpose() * (e_y[i] + (gy[i] * st.psi.col(k)) * b));
      p.l.noalias() +=
          (h_x * b) * (ctx.w_x[i].transpose() * (e_x[i] + (ctx.w_x[i] * st.psi.col(k)) * b));
    }

    Eigen::VectorXd draw;
    if (ctx.normalize_loadings)
      draw = sample_gaussian_constrained(p.Q, p.l, orthogonality_rows(st.psi, k), ctx.rng);
    else
      draw = sample_gaussian_precision(p.Q, p.l, ctx.rng);

    // The loading-times-score product moves by (draw - psi_k) beta_k whether
    // or not the pair is renormalized afterwards.
    const Eigen::VectorXd shift = st.psi.col(k) - draw;
    for (int i = 0; i < n; ++i) {
      const double b = st.mu[k] + st.alpha(k, i);
      e_y[i] += (gy[i] * shift) * b;
      e_x[i] += (ctx.w_x[i] * shift) * b;
    }
    if (ctx.normalize_loadings) {
      const double nrm = unit_normalize(draw);
      st.psi.col(k) = draw;
      st.mu[k] *= nrm;
      st.alpha.row(k) *= nrm;
    } else {
      st.psi.col(k) = draw;
    }

    const GammaParams lp = lambda_f_params(st, ctx, k);
    st.lambda_f[k] = draw_gamma_maybe_truncated(lp, ctx.rng);
  }
}

void step_mgp(ModelState& st, GibbsContext& ctx) {
  const int K = ctx.hp.num_factors;
  for (int h = 0; h < K; ++h) {
    const GammaParams p = delta_mu_params(st, ctx, h);
    st.delta_mu[h] = ctx.rng.gamma(p.shape, p.rate);
  }
  for (int h = 0; h < K; ++h) {
    const GammaParams p = delta_alpha_params(st, ctx, h);
    st.delta_alpha[h] = ctx.rng.gamma(p.shape, p.rate);
  }
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < ctx.n(); ++i) {
      const GammaParams p = zeta_params(st, ctx, k, i);
      st.zeta(k, i) = ctx.rng.gamma(p.shape, p.rate);
    }
}

void step_variances(ModelState& st, GibbsContext& ctx) {
  const GammaParams px = prec_x_params(st, ctx);
  st.sigma2_eps_x = 1.0 / ctx.rng.gamma(px.shape, px.rate);
  const GammaParams py = prec_y_params(st, ctx);
  st.sigma2_eps_y = 1.0 / ctx.rng.gamma(py.shape, py.rate);
  for (int l = 0; l < ctx.hp.num_resid_factors; ++l) {
    const GammaParams pt = prec_theta_params(st, ctx, l);
    st.sigma2_theta[l] = 1.0 / ctx.rng.gamma(pt.shape, pt.rate);
  }
}

void step_shapes(ModelState& st, GibbsContext& ctx) {
  SliceOptions opt;
  opt.width = ctx.hp.slice_width;
  opt.max_stepout = ctx.hp.slice_max_stepout;
  auto draw = [&](const SliceTarget& t, double current) {
    SliceOptions o = opt;
    o.lower = t.lower;
    o.upper = t.upper;
    return slice_sample(t.logdensity, current, o, ctx.rng);
  };
  st.a_mu1 = draw(shape_mu1_target(st), st.a_mu1);
  st.a_mu2 = draw(shape_mu2_target(st), st.a_mu2);
  st.a_alpha1 = draw(shape_alpha1_target(st), st.a_alpha1);
  st.a_alpha2 = draw(shape_alpha2_target(st), st.a_alpha2);
  st.nu_alpha = draw(nu_target(st, ctx), st.nu_alpha);
}

void sweep(ModelState& st, GibbsContext& ctx) {
  step_gamma(st, ctx);
  step_theta(st, ctx);
  step_phi(st, ctx);
  step_lag(st, ctx);
  step_factors(st, ctx);
  step_psi(st, ctx);
  step_mgp(st, ctx);
  step_variances(st, ctx);
  step_shapes(st, ctx);
}

}  // namespace sfcr
