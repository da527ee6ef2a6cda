#include "sfcr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sfcr/mvn.hpp"

namespace sfcr {

namespace {

constexpr double kTwoPi = 6.283185307179586;

std::string lattice_id(int i) {
  std::string num = std::to_string(i);
  if (num.size() < 2) num.insert(num.begin(), '0');
  return "site" + num;
}

void validate_schedule(const SimSchedule& sched, int n) {
  if (sched.x_period < 1 || sched.y_period < 1)
    throw ConfigError("schedule", "sampling periods must be >= 1");
  if (sched.y_tail_missing < 0 || sched.y_tail_missing >= 1 || sched.y_random_missing < 0 ||
      sched.y_random_missing >= 1)
    throw ConfigError("schedule", "missingness fractions must lie in [0, 1)");
  for (int s : sched.holdout_sites)
    if (s < 0 || s >= n) throw ConfigError("schedule", "holdout site index out of range");
}

// Truth smoothing precisions: irrelevant to the data but kept loosely
// consistent with the realized curves so density evaluations at the truth are
// not absurd.  Clamped because exactly penalty-free directions would send the
// matched value to infinity.
double matched_lambda(const BasisSystem& sys, const Eigen::VectorXd& w) {
  const double quad = w.dot(sys.penalty * w);
  const double lam = sys.penalty_rank / (quad + 1e-8);
  return std::clamp(lam, 1.0, 1e6);
}

// Shrinkage precisions delta implied by target variances (first entry is the
// precision itself, later entries are ratios).
Eigen::VectorXd deltas_for(const Eigen::VectorXd& variances) {
  Eigen::VectorXd delta(variances.size());
  double prev = 1.0;
  for (int k = 0; k < variances.size(); ++k) {
    const double prec = 1.0 / variances[k];
    delta[k] = prec / prev;
    prev = prec;
  }
  return delta;
}

ModelState build_truth(const Hyperparams& hp, int n, const Bases& bases,
                       const SpatialGraph& graph, const SimTruth& knobs, Rng& rng) {
  const int K = hp.num_factors, L = hp.num_resid_factors;
  const int ext_rows = bases.grid.ext_size();
  if (knobs.lag > hp.max_lag) throw ConfigError("truth", "true lag outside [0, max_lag]");

  ModelState st = make_state(hp, n);
  st.lag = knobs.lag < 0 ? std::min(8, hp.max_lag) : knobs.lag;
  st.sigma2_eps_x = knobs.sigma_eps_x * knobs.sigma_eps_x;
  st.sigma2_eps_y = knobs.sigma_eps_y * knobs.sigma_eps_y;

  // Loadings: leading basis directions, so the loading curves are exactly
  // orthonormal and the exposure truth lives in the model family.
  st.psi.setZero();
  for (int k = 0; k < K; ++k) st.psi(k, k) = 1.0;
  st.phi.setZero();
  for (int l = 0; l < L; ++l) st.phi(l, l) = 1.0;

  // Seasonal exposure targets, projected onto the loading span (columns of
  // the exposure basis are orthonormal, so projection = inner products).
  const Eigen::MatrixXd& W = bases.exposure_sys.eval;
  Eigen::MatrixXd scores(K, n);
  for (int i = 0; i < n; ++i) {
    const double p1 = rng.uniform(0.0, kTwoPi);
    const double p2 = rng.uniform(0.0, kTwoPi);
    Eigen::VectorXd target(ext_rows);
    for (int r = 0; r < ext_rows; ++r)
      target[r] = knobs.x_level + 1.2 * std::sin(kTwoPi * r / 150.0 + p1) +
                  0.8 * std::sin(kTwoPi * r / 110.0 + p2);
    scores.col(i) = W.leftCols(K).transpose() * target;
  }
  st.mu = scores.rowwise().mean();
  st.alpha = scores.colwise() - st.mu;

  // Transfer coefficient: least-squares fit of a slow wave in the B-spline.
  Eigen::VectorXd gamma_target(bases.grid.size());
  for (int t = 0; t < bases.grid.size(); ++t)
    gamma_target[t] = knobs.gamma_level + knobs.gamma_wave * std::sin(kTwoPi * t / 140.0 + 1.0);
  st.gamma = bases.gamma_sys.eval.colPivHouseholderQr().solve(gamma_target);

  // Spatially correlated residual scores.  The intrinsic prior's constant
  // mode has variance ~1/jitter, so a raw draw is dominated by an arbitrary
  // common level; the truth uses the draw restricted to the contrast
  // subspace (mean removed), which is the bounded, spatially structured part.
  Eigen::MatrixXd car_prec = graph.Q;
  car_prec.diagonal().array() += graph.jitter;
  const Eigen::VectorXd zero_n = Eigen::VectorXd::Zero(n);
  const double s2_theta = knobs.sigma_theta * knobs.sigma_theta;
  for (int l = 0; l < L; ++l) {
    st.sigma2_theta[l] = s2_theta;
    if (s2_theta > 0) {
      Eigen::VectorXd draw = sample_gaussian_precision(car_prec / s2_theta, zero_n, rng);
      st.theta.row(l) = (draw.array() - draw.mean()).transpose();
    }  // zero-noise synthesis keeps the rows exactly zero
  }

  // Hyperparameters loosely matched to the realized state.
  st.lambda_gamma = matched_lambda(bases.gamma_sys, st.gamma);
  for (int k = 0; k < K; ++k) st.lambda_f[k] = matched_lambda(bases.exposure_sys, st.psi.col(k));
  for (int l = 0; l < L; ++l) st.lambda_g[l] = matched_lambda(bases.resid_sys, st.phi.col(l));
  Eigen::VectorXd var_mu(K), var_alpha(K);
  for (int k = 0; k < K; ++k) {
    var_mu[k] = std::max(st.mu[k] * st.mu[k], 1e-4);
    var_alpha[k] = std::max(st.alpha.row(k).squaredNorm() / n, 1e-6);
  }
  st.delta_mu = deltas_for(var_mu);
  st.delta_alpha = deltas_for(var_alpha);
  return st;
}

double observe_mean_y(const DerivedCurves& curves, int t, int i) {
  return curves.fitted_y(t, i);
}

void apply_schedule(Dataset& data, const ModelState& truth, const Bases& bases,
                    const SimSchedule& sched, Rng& rng) {
  const int n = data.n();
  const int M = bases.grid.size();
  const int ext = bases.grid.extension;
  const DerivedCurves curves = derive_curves(truth, bases);
  const double sd_y = std::sqrt(truth.sigma2_eps_y);
  const double sd_x = std::sqrt(truth.sigma2_eps_x);
  // std::normal_distribution requires a positive spread; zero-noise synthesis
  // (exact generative identities) skips the draw.
  auto noise = [&rng](double sd) { return sd > 0 ? rng.normal(0.0, sd) : 0.0; };
  const std::set<int> holdout(sched.holdout_sites.begin(), sched.holdout_sites.end());
  const int y_span = M - static_cast<int>(std::floor(sched.y_tail_missing * M));

  data.y.assign(n, SiteSeries{});
  data.x.assign(n, SiteSeries{});
  for (int i = 0; i < n; ++i) {
    if (!holdout.count(i)) {
      std::vector<double> vals;
      for (int t = 0; t < y_span; t += sched.y_period) {
        if (sched.y_random_missing > 0 && rng.uniform() < sched.y_random_missing) continue;
        double v = observe_mean_y(curves, t, i) + noise(sd_y);
        if (sched.clamp_y) v = std::clamp(v, 0.0, 1.0);
        data.y[i].idx.push_back(t);
        vals.push_back(v);
      }
      data.y[i].values = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
    }
    std::vector<double> vals;
    for (int t = 0; t < M; t += sched.x_period) {
      data.x[i].idx.push_back(t);
      vals.push_back(curves.exposure(t + ext, i) + noise(sd_x));
    }
    data.x[i].values = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
  }
}

Simulation assemble(const Hyperparams& hp_in, int n, int num_days, const SimSchedule& sched,
                    std::uint64_t seed, const SimTruth* knobs, const ModelState* given) {
  if (n < 2) throw ConfigError("simulate", "need at least two sites");
  if (num_days < 2 * hp_in.max_lag)
    throw ConfigError("simulate", "grid too short: need at least 2*max_lag days");
  Grid grid{0, num_days, hp_in.max_lag};
  Simulation sim;
  sim.hp = hp_in.resolved(grid);
  sim.bases = make_bases(grid, sim.hp);
  sim.regions = lattice_regions(n);
  sim.graph = knn_weights(sim.regions, std::min(10, n - 1));
  validate_schedule(sched, n);

  Rng rng(seed);
  if (given) {
    given->validate(sim.hp, n);
    sim.truth = *given;
  } else {
    sim.truth = build_truth(sim.hp, n, sim.bases, sim.graph, *knobs, rng);
  }

  sim.data.grid = grid;
  for (int i = 0; i < n; ++i) sim.data.site_ids.push_back(sim.regions[i].id);
  sim.data.regions = sim.regions;
  apply_schedule(sim.data, sim.truth, sim.bases, sched, rng);
  sim.data.validate(sched.clamp_y);
  return sim;
}

}  // namespace

std::vector<Region> lattice_regions(int n) {
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const double side = 1000.0;
  std::vector<Region> out;
  for (int i = 0; i < n; ++i) {
    const double x0 = (i % cols) * side;
    const double y0 = (i / cols) * side;
    Region r;
    r.id = lattice_id(i);
    r.rings = {{{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}}};
    out.push_back(std::move(r));
  }
  return out;
}

Simulation simulate(const Hyperparams& hp, int n, int num_days, const SimSchedule& sched,
                    std::uint64_t seed, const SimTruth& knobs) {
  return assemble(hp, n, num_days, sched, seed, &knobs, nullptr);
}

Simulation simulate_given(const Hyperparams& hp, int n, int num_days, const SimSchedule& sched,
                          std::uint64_t seed, const ModelState& truth) {
  return assemble(hp, n, num_days, sched, seed, nullptr, &truth);
}

void redraw_observations(Dataset& data, const ModelState& state, const Bases& bases, Rng& rng,
                         bool clamp_y) {
  if (state.num_sites() != data.n())
    throw DimensionError("redraw_observations: state/site count mismatch");
  const DerivedCurves curves = derive_curves(state, bases);
  const double sd_y = std::sqrt(state.sigma2_eps_y);
  const double sd_x = std::sqrt(state.sigma2_eps_x);
  auto noise = [&rng](double sd) { return sd > 0 ? rng.normal(0.0, sd) : 0.0; };
  const int ext = bases.grid.extension;
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.y[i].count(); ++j) {
      double v = curves.fitted_y(data.y[i].idx[j], i) + noise(sd_y);
      if (clamp_y) v = std::clamp(v, 0.0, 1.0);
      data.y[i].values[j] = v;
    }
    for (int j = 0; j < data.x[i].count(); ++j)
      data.x[i].values[j] = curves.exposure(data.x[i].idx[j] + ext, i) + noise(sd_x);
  }
}

}  // namespace sfcr
