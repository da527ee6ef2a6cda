// Release gate for the spatial functional concurrent regression tool.
//
// Each criterion below is a release requirement with its tolerances pinned in
// code.  Running the binary prints one [PASS]/[FAIL] line per criterion and
// exits nonzero if any selected criterion fails.  Criterion numbers given as
// arguments select a subset:
//
//   acceptance        # run everything
//   acceptance 4 7 8  # run only the listed criteria
//
// The synthetic-recovery criteria (1-3) drive the real cmd_simulate/cmd_fit
// pipeline and judge the written artifacts, exactly as a user would see them.
// All seeds are fixed: a failing replicate stays failing rather than being
// re-rolled.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <json.hpp>

#include "sfcr/cli.hpp"
#include "sfcr/gibbs.hpp"
#include "sfcr/inference.hpp"
#include "sfcr/mvn.hpp"
#include "sfcr/simulate.hpp"
#include "sfcr/slice.hpp"
#include "sfcr/spatial.hpp"
#include "support/grid_oracle.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sfcr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path scratch_root() { return fs::temp_directory_path() / "sfcr_acceptance"; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("acceptance", "cannot open '" + p.string() + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

// Rows of a headered CSV as column-name -> cell maps.  The emitted summaries
// use plain commas with no quoting, so a straight split is exact.
std::vector<std::map<std::string, std::string>> csv_rows(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  if (!std::getline(in, line)) throw InputError("acceptance", p.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split(line, ',');
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line, ',');
    std::map<std::string, std::string> row;
    for (std::size_t c = 0; c < header.size() && c < cells.size(); ++c) row[header[c]] = cells[c];
    rows.push_back(std::move(row));
  }
  return rows;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

// ---- Synthetic recovery fits (criteria 1-3) ---------------------------------
//
// Scenario: 10 sites, 300 days, weekly exposure sampling, daily positivity
// with the final 30% of days unreported, true lag 8, default priors, one
// 5000-iteration chain (2000 burn-in, thin 2).

constexpr int kReplicates = 10;
constexpr int kTrueLag = 8;
constexpr double kFitTimeLimit = 600.0;  // seconds per replicate

struct ReplicateResult {
  int mode = -1;
  bool hpd95_has_truth = false;
  double seconds = 0.0;
  double coverage = 0.0;  // fraction of grid days with truth inside the 95% band
  double rel_l2 = 0.0;    // posterior-mean transfer curve vs truth
};

SimulateOptions scenario_options(const fs::path& dir, std::uint64_t seed) {
  SimulateOptions so;
  so.out_dir = dir.string();
  so.sites = 10;
  so.days = 300;
  so.seed = seed;
  so.schedule.y_tail_missing = 0.30;
  so.truth.lag = kTrueLag;
  return so;
}

FitOptions fit_options(const fs::path& sim_dir, const fs::path& out_dir, std::uint64_t seed) {
  FitOptions fo;
  fo.y_csv = (sim_dir / "y.csv").string();
  fo.x_csv = (sim_dir / "x.csv").string();
  fo.geo = (sim_dir / "geo.geojson").string();
  fo.out_dir = out_dir.string();
  fo.run.iterations = 5000;
  fo.run.burn_in = 2000;
  fo.run.thin = 2;
  fo.run.chains = 1;
  fo.run.seed = seed;
  fo.run.checkpoint_every = 0;
  return fo;
}

// Mode of lag_posterior.csv and the 95% row of lag_hpd.csv.
void parse_lag_outputs(const fs::path& fit_dir, int* mode, bool* hpd_has_truth) {
  double best = -1.0;
  *mode = -1;
  for (const auto& row : csv_rows(fit_dir / "lag_posterior.csv")) {
    const double p = std::stod(row.at("probability"));
    if (p > best) {
      best = p;
      *mode = std::stoi(row.at("lag"));
    }
  }
  *hpd_has_truth = false;
  for (const auto& row : csv_rows(fit_dir / "lag_hpd.csv")) {
    if (row.at("level") != "0.95") continue;
    for (const std::string& s : split(row.at("lags"), ';'))
      if (!s.empty() && std::stoi(s) == kTrueLag) *hpd_has_truth = true;
  }
}

// Summary rows for one curve: per grid day {time, mean, lo, hi}.
struct CurveBand {
  std::vector<int> time;
  std::vector<double> mean, lo, hi;
};

CurveBand parse_band(const fs::path& fit_dir, const std::string& curve,
                     const std::string& site_id) {
  CurveBand b;
  for (const auto& row : csv_rows(fit_dir / "curve_summaries.csv")) {
    if (row.at("curve") != curve || row.at("site_id") != site_id) continue;
    b.time.push_back(std::stoi(row.at("time")));
    b.mean.push_back(std::stod(row.at("mean")));
    b.lo.push_back(std::stod(row.at("q2.5")));
    b.hi.push_back(std::stod(row.at("q97.5")));
  }
  if (b.time.empty())
    throw InputError("acceptance", "no '" + curve + "' rows in " + fit_dir.string());
  return b;
}

// The fit grid can be shorter than the simulation grid (the tail-missing days
// extend past the last observation); both start at day 0, so truth curves
// align by day index.
void band_vs_truth(const CurveBand& band, const std::vector<double>& truth, double* coverage,
                   double* rel_l2) {
  int covered = 0;
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < band.time.size(); ++j) {
    const double g = truth.at(static_cast<std::size_t>(band.time[j]));
    covered += (band.lo[j] <= g && g <= band.hi[j]) ? 1 : 0;
    num += (band.mean[j] - g) * (band.mean[j] - g);
    den += g * g;
  }
  *coverage = static_cast<double>(covered) / static_cast<double>(band.time.size());
  *rel_l2 = std::sqrt(num / den);
}

const std::vector<ReplicateResult>& replicates() {
  static const std::vector<ReplicateResult> results = [] {
    std::vector<ReplicateResult> out;
    for (int r = 0; r < kReplicates; ++r) {
      const fs::path dir = scratch_root() / ("replicate" + std::to_string(r));
      fs::remove_all(dir);
      cmd_simulate(scenario_options(dir / "sim", 201u + static_cast<std::uint64_t>(r)));

      const auto t0 = Clock::now();
      cmd_fit(fit_options(dir / "sim", dir / "fit", 7201u + static_cast<std::uint64_t>(r)));
      ReplicateResult res;
      res.seconds = seconds_since(t0);

      parse_lag_outputs(dir / "fit", &res.mode, &res.hpd95_has_truth);
      const json truth = json::parse(read_file(dir / "sim" / "truth.json"));
      band_vs_truth(parse_band(dir / "fit", "gamma", ""),
                    truth.at("gamma").get<std::vector<double>>(), &res.coverage, &res.rel_l2);
      out.push_back(res);

      std::cout << "       replicate " << r << ": lag mode " << res.mode << ", 95% HPD "
                << (res.hpd95_has_truth ? "contains" : "misses") << " " << kTrueLag
                << ", band coverage " << fmt(res.coverage) << ", rel L2 " << fmt(res.rel_l2)
                << ", " << fmt(res.seconds, 1) << "s\n"
                << std::flush;
    }
    return out;
  }();
  return results;
}

// ---- Criterion 1: lag recovery ----------------------------------------------

Outcome criterion_lag_recovery() {
  int good = 0;
  double slowest = 0.0;
  for (const ReplicateResult& r : replicates()) {
    if (std::abs(r.mode - kTrueLag) <= 1 && r.hpd95_has_truth) ++good;
    slowest = std::max(slowest, r.seconds);
  }
  Outcome o;
  o.pass = good >= 9 && slowest <= kFitTimeLimit;
  o.detail = std::to_string(good) + "/" + std::to_string(kReplicates) +
             " replicates with lag mode " + std::to_string(kTrueLag) +
             "+/-1 and 95% HPD containing " + std::to_string(kTrueLag) +
             " (need >= 9); slowest fit " + fmt(slowest, 1) + "s (limit " +
             fmt(kFitTimeLimit, 0) + "s)";
  return o;
}

// ---- Criterion 2: transfer-curve recovery -----------------------------------

Outcome criterion_curve_recovery() {
  double cov = 0.0, rel = 0.0;
  for (const ReplicateResult& r : replicates()) {
    cov += r.coverage;
    rel += r.rel_l2;
  }
  cov /= kReplicates;
  rel /= kReplicates;
  Outcome o;
  o.pass = cov >= 0.85 && rel < 0.15;
  o.detail = "mean 95% band coverage " + fmt(cov) + " (need >= 0.85); mean relative L2 error " +
             fmt(rel) + " (need < 0.15)";
  return o;
}

// ---- Criterion 3: withheld-site prediction ----------------------------------
//
// One site's entire positivity series is withheld (its exposure data stays);
// the posterior-mean fitted positivity at that site must stay within 1.5x the
// error at the fully observed sites.  Tail missingness is dropped here so the
// reference sites really are fully observed.

Outcome criterion_withheld_site() {
  const int holdout = 7;
  const fs::path dir = scratch_root() / "holdout";
  fs::remove_all(dir);

  SimulateOptions so = scenario_options(dir / "sim", 261u);
  so.schedule.y_tail_missing = 0.0;
  so.schedule.holdout_sites = {holdout};
  cmd_simulate(so);
  cmd_fit(fit_options(dir / "sim", dir / "fit", 7261u));

  const json truth = json::parse(read_file(dir / "sim" / "truth.json"));
  const auto site_ids = truth.at("site_ids").get<std::vector<std::string>>();
  const auto fitted_truth = truth.at("fitted_y").get<std::vector<std::vector<double>>>();

  double holdout_rmse = 0.0, observed_sum = 0.0;
  int observed_count = 0;
  for (std::size_t i = 0; i < site_ids.size(); ++i) {
    const CurveBand band = parse_band(dir / "fit", "fitted_y", site_ids[i]);
    double sq = 0.0;
    for (std::size_t j = 0; j < band.time.size(); ++j) {
      const double g = fitted_truth.at(i).at(static_cast<std::size_t>(band.time[j]));
      sq += (band.mean[j] - g) * (band.mean[j] - g);
    }
    const double rmse = std::sqrt(sq / static_cast<double>(band.time.size()));
    if (static_cast<int>(i) == holdout) {
      holdout_rmse = rmse;
    } else {
      observed_sum += rmse;
      ++observed_count;
    }
  }
  const double observed_rmse = observed_sum / observed_count;

  Outcome o;
  o.pass = holdout_rmse <= 1.5 * observed_rmse;
  o.detail = "withheld-site RMSE " + fmt(holdout_rmse, 5) + " vs observed-site mean " +
             fmt(observed_rmse, 5) + " (ratio " + fmt(holdout_rmse / observed_rmse) +
             ", need <= 1.5)";
  return o;
}

// ---- Criterion 4: full-conditional grid oracle --------------------------------

Outcome criterion_grid_oracle() {
  const auto t0 = Clock::now();
  const auto devs = grid_oracle::all_conditional_deviations();
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& d : devs) {
    if (d.dev > worst) {
      worst = d.dev;
      worst_name = d.name;
    }
  }
  Outcome o;
  o.pass = worst < 1e-6 && secs < 60.0;
  o.detail = std::to_string(devs.size()) + " conditionals, worst deviation " + fmt(worst, 12) +
             " (" + worst_name + ", need < 1e-6) in " + fmt(secs, 1) + "s (limit 60s)";
  return o;
}

// ---- Criterion 5: Geweke prior-reproduction check -----------------------------
//
// Forward draws from the prior are compared against a Gibbs chain that
// alternates a sweep with resimulating the observations given the state.  If
// every full conditional is correct, both sample the same joint distribution,
// so the marginal means of the lag, the positivity noise variance, and the
// first score mean must agree within Monte Carlo error.  Proper priors
// throughout: ridge-propered curve priors, a tight smoothing-precision range,
// informative noise priors, and no loading renormalization.

struct GewekeTraces {
  Eigen::VectorXd lag, sigma2_y, mu1;
};

Outcome criterion_geweke() {
  Hyperparams hp;
  hp.num_factors = 2;
  hp.num_resid_factors = 1;
  hp.gamma_basis = 4;
  hp.exposure_basis = 6;
  hp.resid_basis = 6;
  hp.max_lag = 5;
  hp.penalty_ridge = 0.05;
  hp.lambda_half_upper = 10.0;
  hp.a_eps_x = hp.a_eps_y = hp.a_theta = 3.0;
  hp.b_eps_x = hp.b_eps_y = hp.b_theta = 1.0;
  hp.orthonormal_loadings = false;

  const int n = 4;
  const Grid grid{0, 60, hp.max_lag};
  hp = hp.resolved(grid);
  const Bases bases = make_bases(grid, hp);
  const auto regions = lattice_regions(n);
  const SpatialGraph graph = knn_weights(regions, 2);

  Dataset data;
  data.grid = grid;
  data.regions = regions;
  data.site_ids = graph.ids;
  data.y.resize(n);
  data.x.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < grid.num_days; ++t) data.y[i].idx.push_back(t);      // daily
    for (int t = 0; t < grid.num_days; t += 7) data.x[i].idx.push_back(t);   // weekly
    data.y[i].values = Eigen::VectorXd::Zero(data.y[i].count());
    data.x[i].values = Eigen::VectorXd::Zero(data.x[i].count());
  }

  const int forward_draws = 30000;
  GewekeTraces fwd{Eigen::VectorXd(forward_draws), Eigen::VectorXd(forward_draws),
                   Eigen::VectorXd(forward_draws)};
  Rng frng(900001u);
  for (int t = 0; t < forward_draws; ++t) {
    const ModelState st = draw_from_prior(hp, n, bases, graph, frng);
    fwd.lag[t] = st.lag;
    fwd.sigma2_y[t] = st.sigma2_eps_y;
    fwd.mu1[t] = st.mu[0];
  }

  const int sweeps = 12000, burn = 2000, kept = sweeps - burn;
  GewekeTraces gibbs{Eigen::VectorXd(kept), Eigen::VectorXd(kept), Eigen::VectorXd(kept)};
  Rng grng(900002u);
  ModelState st = draw_from_prior(hp, n, bases, graph, grng);
  redraw_observations(data, st, bases, grng, /*clamp_y=*/false);
  GibbsContext ctx(data, hp, bases, graph, 900003u);
  for (int t = 0; t < sweeps; ++t) {
    sweep(st, ctx);
    redraw_observations(data, st, bases, grng, /*clamp_y=*/false);
    if (t >= burn) {
      gibbs.lag[t - burn] = st.lag;
      gibbs.sigma2_y[t - burn] = st.sigma2_eps_y;
      gibbs.mu1[t - burn] = st.mu[0];
    }
  }

  // Forward draws are iid; the Gibbs trace discounts by effective sample size.
  auto gap_in_se = [](const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
    const double mf = f.mean(), mg = g.mean();
    const double vf = (f.array() - mf).square().sum() / (f.size() - 1);
    const double vg = (g.array() - mg).square().sum() / (g.size() - 1);
    const double se = std::sqrt(vf / f.size() + vg / ess(g).ess);
    return std::abs(mf - mg) / se;
  };

  const double z_lag = gap_in_se(fwd.lag, gibbs.lag);
  const double z_sig = gap_in_se(fwd.sigma2_y, gibbs.sigma2_y);
  const double z_mu = gap_in_se(fwd.mu1, gibbs.mu1);

  Outcome o;
  o.pass = z_lag < 3.0 && z_sig < 3.0 && z_mu < 3.0;
  o.detail = "forward vs Gibbs-with-resimulation gaps: lag " + fmt(z_lag, 2) +
             " se, noise variance " + fmt(z_sig, 2) + " se, first score mean " + fmt(z_mu, 2) +
             " se (all need < 3); means lag " + fmt(fwd.lag.mean(), 3) + "/" +
             fmt(gibbs.lag.mean(), 3) + ", sigma2_y " + fmt(fwd.sigma2_y.mean(), 3) + "/" +
             fmt(gibbs.sigma2_y.mean(), 3);
  return o;
}

// ---- Criterion 6: structural invariants over a long run -----------------------

Outcome criterion_invariants() {
  const auto t0 = Clock::now();
  Simulation sim = simulate(grid_oracle::small_hp(), 6, 60, SimSchedule{}, 33u);
  GibbsContext ctx(sim.data, sim.hp, sim.bases, sim.graph, 34u);
  ModelState st = initial_state(sim.data, sim.hp, sim.bases);

  sim.data.validate();
  double car_worst = 0.0;
  for (int i = 0; i < sim.graph.size(); ++i)
    car_worst = std::max(car_worst, std::abs(sim.graph.Q.row(i).sum()));

  auto gram_gap = [](const Eigen::MatrixXd& eval, const Eigen::MatrixXd& coef) {
    const Eigen::MatrixXd curves = eval * coef;
    const Eigen::MatrixXd gram = curves.transpose() * curves;
    return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
  };

  double worst_f = 0.0, worst_g = 0.0;
  bool state_ok = true;
  const int sweeps = 1000;
  for (int t = 0; t < sweeps; ++t) {
    sweep(st, ctx);
    try {
      st.validate(sim.hp, ctx.n());
    } catch (const std::exception&) {
      state_ok = false;
      break;
    }
    worst_f = std::max(worst_f, gram_gap(sim.bases.exposure_sys.eval, st.psi));
    worst_g = std::max(worst_g, gram_gap(sim.bases.resid_sys.eval, st.phi));
  }
  const double secs = seconds_since(t0);

  Outcome o;
  o.pass = state_ok && worst_f < 1e-8 && worst_g < 1e-8 && car_worst < 1e-10 && secs < 120.0;
  o.detail = std::to_string(sweeps) + " sweeps: loading grams off identity by " +
             fmt(worst_f, 12) + " / " + fmt(worst_g, 12) + " (need < 1e-8), CAR row sums " +
             fmt(car_worst, 14) + " (need < 1e-10), state invariants " +
             (state_ok ? "held" : "VIOLATED") + ", " + fmt(secs, 1) + "s (limit 120s)";
  return o;
}

// ---- Criterion 7: spatial distance and graph oracle ----------------------------

Region unit_square(const std::string& id, double x0, double y0) {
  return Region{id, {{{x0, y0}, {x0 + 1, y0}, {x0 + 1, y0 + 1}, {x0, y0 + 1}}}};
}

Outcome criterion_spatial_oracle() {
  // Unit squares two apart: classical Hausdorff distance exactly 2.
  const Region a = unit_square("a", 0, 0);
  const Region b = unit_square("b", 2, 0);
  const double d50 = extended_hausdorff(a, b, 1.0, 50.0);
  const double d200 = extended_hausdorff(a, b, 1.0, 200.0);
  const bool translated_ok =
      std::abs(d50 - 2.0) < 1.0 / 50.0 && std::abs(d200 - 2.0) <= std::abs(d50 - 2.0) + 1e-12;

  // A vertical offset breaks the sample alignment so the discretization error
  // is visible; it must at least halve as the sampling density doubles.
  const Region c = unit_square("c", 2.0, 0.37);
  const double exact = std::sqrt(4.0 + 0.37 * 0.37);
  double err_prev = -1.0;
  bool halving_ok = true;
  for (double res : {25.0, 50.0, 100.0}) {
    const double err = std::abs(extended_hausdorff(a, c, 1.0, res) - exact);
    if (err_prev >= 0.0 && err > 0.6 * err_prev + 1e-9) halving_ok = false;
    err_prev = err;
  }

  // kNN weights on a 5-region fixture against brute-force enumeration
  // (per-site sort, index tie-break, union symmetrization).
  std::vector<Region> regions = {unit_square("s0", 0, 0), unit_square("s1", 1.2, 0),
                                 unit_square("s2", 2.9, 0), unit_square("s3", 0, 1.4),
                                 unit_square("s4", 2.9, 1.6)};
  const int k = 2, m = 5;
  const double res = 30.0;
  const SpatialGraph graph = knn_weights(regions, k, 0.5, res);
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      dist(i, j) = extended_hausdorff(regions[i], regions[j], 0.5, res);
      dist(j, i) = dist(i, j);
    }
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    std::vector<int> order;
    for (int j = 0; j < m; ++j)
      if (j != i) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](int p, int q) {
      return dist(i, p) != dist(i, q) ? dist(i, p) < dist(i, q) : p < q;
    });
    for (int r = 0; r < k; ++r) expect(i, order[r]) = 1.0;
  }
  const Eigen::MatrixXd sym = expect.cwiseMax(expect.transpose().eval());
  const bool knn_ok = graph.D == sym;

  Outcome o;
  o.pass = translated_ok && halving_ok && knn_ok;
  o.detail = "translated squares: distance " + fmt(d50, 6) + " -> " + fmt(d200, 6) +
             " (analytic 2.0); offset-square error halving " +
             (halving_ok ? "holds" : "FAILS") + "; 5-region kNN vs brute force " +
             (knn_ok ? "exact" : "MISMATCH");
  return o;
}

// ---- Criterion 8: sampler primitive distributions ------------------------------

double chi2_pvalue(double stat, int df) {
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), stat));
}

Outcome criterion_primitives() {
  std::vector<std::string> failures;

  {  // Gumbel-max over equal log weights: frequencies uniform (chi-square).
    const int cells = 22, N = 100000;
    const Eigen::VectorXd w = Eigen::VectorXd::Zero(cells);
    Rng rng(777u);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(cells);
    for (int t = 0; t < N; ++t) counts[gumbel_max_draw(w, rng)] += 1;
    const double expected = static_cast<double>(N) / cells;
    double stat = 0.0;
    for (int c = 0; c < cells; ++c) {
      const double d = counts[c] - expected;
      stat += d * d / expected;
    }
    if (chi2_pvalue(stat, cells - 1) <= 0.001) failures.push_back("gumbel uniform chi-square");
  }

  {  // +50 log-weight dominance.
    Eigen::VectorXd w = Eigen::VectorXd::Zero(22);
    w[13] = 50.0;
    Rng rng(99u);
    const int N = 100000;
    int hits = 0;
    for (int t = 0; t < N; ++t)
      if (gumbel_max_draw(w, rng) == 13) ++hits;
    if (static_cast<double>(hits) / N <= 0.999) failures.push_back("gumbel dominance");
  }

  {  // Gumbel-max vs direct inverse-CDF softmax draw: two-sample chi-square.
    Eigen::VectorXd w(6);
    w << 0.0, 1.0, -0.5, 2.0, 0.3, -1.0;
    const int N = 100000;
    Rng rng_a(1001u);
    Eigen::VectorXi a = Eigen::VectorXi::Zero(w.size());
    for (int t = 0; t < N; ++t) a[gumbel_max_draw(w, rng_a)] += 1;
    Eigen::VectorXd p = (w.array() - w.maxCoeff()).exp();
    p /= p.sum();
    Rng rng_b(2002u);
    Eigen::VectorXi bcounts = Eigen::VectorXi::Zero(w.size());
    for (int t = 0; t < N; ++t) {
      double u = rng_b.uniform();
      int s = 0;
      while (s < w.size() - 1 && u > p[s]) {
        u -= p[s];
        ++s;
      }
      bcounts[s] += 1;
    }
    double stat = 0.0;
    for (int c = 0; c < w.size(); ++c) {
      const double d = static_cast<double>(a[c] - bcounts[c]);
      const double tot = static_cast<double>(a[c] + bcounts[c]);
      if (tot > 0) stat += d * d / tot;
    }
    if (chi2_pvalue(stat, static_cast<int>(w.size()) - 1) <= 0.001)
      failures.push_back("gumbel vs direct two-sample");
  }

  {  // Slice sampler, standard normal target: moments over 1e5 transitions.
    SliceOptions opt;
    auto logdensity = [](double x) { return -0.5 * x * x; };
    Rng rng(31415u);
    const int N = 100000;
    double x = 0.0, sum = 0.0, sumsq = 0.0;
    for (int t = 0; t < N; ++t) {
      x = slice_sample(logdensity, x, opt, rng);
      sum += x;
      sumsq += x * x;
    }
    const double mean = sum / N;
    const double var = sumsq / N - mean * mean;
    if (!(std::abs(mean) < 0.02 && var > 0.95 && var < 1.05))
      failures.push_back("slice normal moments (mean " + fmt(mean, 4) + ", var " + fmt(var, 4) +
                         ")");
  }

  {  // Slice sampler, Gamma(2,1) target: mean within 2.0 +/- 0.03.
    SliceOptions opt;
    opt.lower = 0.0;
    auto logdensity = [](double x) {
      return x <= 0.0 ? -std::numeric_limits<double>::infinity() : std::log(x) - x;
    };
    Rng rng(271828u);
    const int N = 100000;
    double x = 2.0, sum = 0.0;
    for (int t = 0; t < N; ++t) {
      x = slice_sample(logdensity, x, opt, rng);
      sum += x;
    }
    if (std::abs(sum / N - 2.0) >= 0.03)
      failures.push_back("slice gamma mean (" + fmt(sum / N, 4) + ")");
  }

  {  // Constrained Gaussian: exact constraint, analytic conditional moments.
    Eigen::MatrixXd Q(3, 3);
    Q << 4.0, 1.2, -0.6, 1.2, 3.0, 0.8, -0.6, 0.8, 2.5;
    Eigen::Vector3d l(1.0, -2.0, 0.5);
    Eigen::MatrixXd C(1, 3);
    C << 1.0, 1.0, 1.0;
    const Eigen::MatrixXd S = Q.inverse();
    const Eigen::VectorXd m = S * l;
    const Eigen::VectorXd Sc = S * C.transpose();
    const double cap = (C * Sc)(0, 0);
    const Eigen::VectorXd m_c = m - Sc * ((C * m)(0, 0) / cap);
    const Eigen::MatrixXd S_c = S - Sc * Sc.transpose() / cap;

    Rng rng(8675309u);
    const int N = 100000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
    Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(3, 3);
    double worst_violation = 0.0;
    for (int t = 0; t < N; ++t) {
      const Eigen::VectorXd x = sample_gaussian_constrained(Q, l, C, rng);
      worst_violation = std::max(worst_violation, std::abs((C * x)(0, 0)));
      sum += x;
      outer += x * x.transpose();
    }
    if (worst_violation >= 1e-10) failures.push_back("constraint violation");
    const Eigen::VectorXd mean = sum / N;
    const Eigen::MatrixXd cov = outer / N - mean * mean.transpose();
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt(std::max(S_c(j, j), 1e-12) / N);
      if (std::abs(mean[j] - m_c[j]) >= 5.0 * se)
        failures.push_back("constrained mean component " + std::to_string(j));
    }
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) {
        const double var_hat = (S_c(p, p) * S_c(q, q) + S_c(p, q) * S_c(p, q)) / N + 1e-16;
        if (std::abs(cov(p, q) - S_c(p, q)) >= 5.0 * std::sqrt(var_hat))
          failures.push_back("constrained covariance (" + std::to_string(p) + "," +
                             std::to_string(q) + ")");
      }
  }

  Outcome o;
  o.pass = failures.empty();
  if (o.pass) {
    o.detail =
        "gumbel-max frequencies, slice-sampler moments, and constrained-Gaussian moments all "
        "within pinned thresholds";
  } else {
    o.detail = "failed: ";
    for (std::size_t i = 0; i < failures.size(); ++i)
      o.detail += (i ? "; " : "") + failures[i];
  }
  return o;
}

// ---- Criterion 9: manifest rerun and checkpoint reproducibility ----------------

Outcome criterion_reproducibility() {
  std::vector<std::string> failures;

  Hyperparams hp;
  hp.num_factors = 2;
  hp.num_resid_factors = 1;
  hp.gamma_basis = 4;
  hp.exposure_basis = 6;
  hp.resid_basis = 6;
  hp.max_lag = 3;

  {  // A fit rerun from its manifest reproduces every output byte-exactly.
    const fs::path dir = scratch_root() / "manifest_rerun";
    fs::remove_all(dir);
    SimulateOptions so;
    so.out_dir = (dir / "sim").string();
    so.sites = 4;
    so.days = 80;
    so.seed = 501u;
    so.truth.lag = 2;
    so.hp = hp;
    cmd_simulate(so);

    FitOptions fa;
    fa.y_csv = (dir / "sim" / "y.csv").string();
    fa.x_csv = (dir / "sim" / "x.csv").string();
    fa.geo = (dir / "sim" / "geo.geojson").string();
    fa.out_dir = (dir / "fitA").string();
    fa.hp = hp;
    fa.run.iterations = 120;
    fa.run.burn_in = 60;
    fa.run.thin = 2;
    fa.run.chains = 2;
    fa.run.seed = 77u;
    fa.run.checkpoint_every = 0;
    fa.run.neighbors = 3;
    cmd_fit(fa);

    FitOptions fb = fit_options_from_manifest((dir / "fitA" / "manifest.json").string());
    fb.out_dir = (dir / "fitB").string();
    cmd_fit(fb);

    const json ma = json::parse(read_file(dir / "fitA" / "manifest.json"));
    const json mb = json::parse(read_file(dir / "fitB" / "manifest.json"));
    for (const auto& [name, digest] : ma.at("outputs").items()) {
      (void)digest;
      if (read_file(dir / "fitA" / name) != read_file(dir / "fitB" / name))
        failures.push_back("output '" + name + "' differs between fit and rerun");
    }
    json ta = ma, tb = mb;
    ta.erase("timings_seconds");
    tb.erase("timings_seconds");
    if (ta != tb) failures.push_back("manifests differ beyond timings");
  }

  {  // Checkpoint round trip: a resumed chain continues bit-identically.
    const fs::path dir = scratch_root() / "checkpoint";
    fs::remove_all(dir);
    fs::create_directories(dir);
    Simulation sim = simulate(hp, 4, 40, SimSchedule{}, 91u);

    GibbsContext ctx(sim.data, sim.hp, sim.bases, sim.graph, 4242u);
    ModelState st = initial_state(sim.data, sim.hp, sim.bases);
    for (int t = 0; t < 30; ++t) sweep(st, ctx);

    Checkpoint ck;
    ck.chain_index = 0;
    ck.sweep = 30;
    ck.seed = 4242u;
    ck.rng_state = ctx.rng.serialize();
    ck.state = st;
    const std::string path = (dir / "chain0_state.json").string();
    save_checkpoint(path, ck, sim.hp);
    const Checkpoint loaded = load_checkpoint(path, sim.hp, sim.data.n());
    if (checkpoint_to_json(loaded, sim.hp) != checkpoint_to_json(ck, sim.hp))
      failures.push_back("checkpoint save/load round trip not exact");

    GibbsContext resumed(sim.data, sim.hp, sim.bases, sim.graph, 1u);
    resumed.rng.deserialize(loaded.rng_state);
    ModelState st2 = loaded.state;
    for (int t = 0; t < 20; ++t) {
      sweep(st, ctx);
      sweep(st2, resumed);
    }
    Checkpoint fin1 = ck, fin2 = ck;
    fin1.state = st;
    fin2.state = st2;
    fin1.rng_state = ctx.rng.serialize();
    fin2.rng_state = resumed.rng.serialize();
    if (checkpoint_to_json(fin1, sim.hp) != checkpoint_to_json(fin2, sim.hp))
      failures.push_back("resumed chain diverged from the uninterrupted one");
  }

  Outcome o;
  o.pass = failures.empty();
  if (o.pass) {
    o.detail =
        "manifest rerun byte-identical (outputs and manifest, timings aside); checkpointed "
        "chain continues bit-exactly";
  } else {
    o.detail = "failed: ";
    for (std::size_t i = 0; i < failures.size(); ++i)
      o.detail += (i ? "; " : "") + failures[i];
  }
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> check;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "lag recovery", criterion_lag_recovery},
      {2, "transfer-curve recovery", criterion_curve_recovery},
      {3, "withheld-site prediction", criterion_withheld_site},
      {4, "full-conditional grid oracle", criterion_grid_oracle},
      {5, "Geweke prior reproduction", criterion_geweke},
      {6, "structural invariants", criterion_invariants},
      {7, "spatial distance and graph oracle", criterion_spatial_oracle},
      {8, "sampler primitive distributions", criterion_primitives},
      {9, "manifest and checkpoint reproducibility", criterion_reproducibility},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int a = 1; a < argc; ++a) {
    try {
      selected.push_back(std::stoi(argv[a]));
    } catch (const std::exception&) {
      std::cerr << "usage: acceptance [criterion numbers]\n";
      return 2;
    }
  }

  fs::remove_all(scratch_root());
  fs::create_directories(scratch_root());

  bool all_pass = true;
  int ran = 0;
  for (const Criterion& c : criteria()) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.id) == selected.end())
      continue;
    ++ran;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    all_pass = all_pass && out.pass;
    std::cout << (out.pass ? "[PASS] " : "[FAIL] ") << c.id << ". " << c.name << " ("
              << fmt(seconds_since(t0), 1) << "s)\n       " << out.detail << "\n"
              << std::flush;
  }

  if (ran == 0) {
    std::cerr << "no matching criteria\n";
    return 2;
  }
  std::cout << (all_pass ? "acceptance: all criteria passed\n"
                         : "acceptance: FAILURES above\n");
  return all_pass ? 0 : 1;
}
