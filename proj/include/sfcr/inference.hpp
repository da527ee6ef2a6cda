#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sfcr/data.hpp"
#include "sfcr/model.hpp"
#include "sfcr/spatial.hpp"
#include "sfcr/state.hpp"

namespace sfcr {

// Orchestration settings for a fit.  Desk-scale defaults; a paper-scale run
// just raises iterations/burn_in.  `neighbors`, `hausdorff_quantile` and
// `resolution` configure the spatial graph the narrow run() overload builds
// from the dataset's regions.
struct RunConfig {
  int iterations = 5000;
  int burn_in = 2000;
  int thin = 2;
  int chains = 2;
  std::uint64_t seed = 0;
  int checkpoint_every = 1000;  // sweeps between resume checkpoints; 0 disables
  std::string checkpoint_dir;   // chain state/draw files land here; empty: keep in memory only

  int neighbors = 5;                // kNN degree (clamped to n-1)
  double hausdorff_quantile = 0.5;  // robust quantile for region distances
  double resolution = 0.0;          // sampling spacing; 0 picks one from the joint extent

  // Draws kept per chain: sweeps past burn_in, one in `thin`.
  int retained() const { return (iterations - burn_in + thin - 1) / thin; }

  // burn_in == iterations is legal and yields a valid zero-draw output.
  void validate() const;
};

// One chain's retained draws.  Memory policy: curve evaluations and scalar
// traces per retained draw; the full state only at checkpoints and at the end.
struct ChainOutput {
  int chain_index = 0;
  Eigen::VectorXi lag_counts;  // max_lag+1 bins; sums to retained()

  std::vector<int> lag_trace;
  Eigen::VectorXd sigma2_eps_y_trace;
  Eigen::VectorXd sigma2_eps_x_trace;
  Eigen::VectorXd log_joint_trace;

  Eigen::MatrixXd gamma_draws;                  // D x M: transfer curve per draw
  Eigen::MatrixXd mu_curve_draws;               // D x M: mean exposure curve per draw
  std::vector<Eigen::MatrixXd> exposure_draws;  // per site: D x M latent exposure
  std::vector<Eigen::MatrixXd> fitted_y_draws;  // per site: D x M fitted positivity

  ModelState final_state;  // state after the last sweep (empty for loaded draw stores)

  int retained() const { return static_cast<int>(lag_trace.size()); }
};

// Deterministic data-driven start: exposure factors from the truncated SVD of
// per-site linearly interpolated x projected on the exposure basis; gamma,
// theta and lag at zero; error variances from method-of-moments residuals;
// shrinkage and smoothing parameters at their neutral values.
ModelState initial_state(const Dataset& data, const Hyperparams& hp, const Bases& bases);

// Runs `config.chains` independent chains concurrently, all from the same
// deterministic start, each with its own stream derived from (seed, chain).
// The narrow overload builds the kNN graph from data.regions.  A sampler
// error aborts the run: the failing chain writes an abort checkpoint (when a
// checkpoint_dir is set) and the error is rethrown with chain/sweep context.
std::vector<ChainOutput> run(const Dataset& data, const Hyperparams& hp,
                             const SpatialGraph& graph, const RunConfig& config,
                             const ModelState* init = nullptr);
std::vector<ChainOutput> run(const Dataset& data, const Hyperparams& hp,
                             const RunConfig& config);

// ---- Checkpoints ------------------------------------------------------------
// Versioned JSON snapshot of one chain: enough to continue the trajectory
// bit-exactly (full state + serialized generator) and to check compatibility
// (model dimensions).  Draw stores are separate files (save_draws below).

struct Checkpoint {
  int version = 1;
  int chain_index = 0;
  int sweep = 0;  // completed sweeps
  std::uint64_t seed = 0;
  std::string rng_state;
  ModelState state;
};

std::string checkpoint_to_json(const Checkpoint& ck, const Hyperparams& hp);
Checkpoint checkpoint_from_json(const std::string& text, const Hyperparams& hp, int n);
void save_checkpoint(const std::string& path, const Checkpoint& ck, const Hyperparams& hp);
Checkpoint load_checkpoint(const std::string& path, const Hyperparams& hp, int n);

// Binary draw store (curve draws + scalar traces) for re-summarization
// without re-sampling; round-trips bit-exactly.  The store is self-describing:
// it carries the grid's first day offset and the site ids so summaries can be
// regenerated without the original inputs.  final_state is not stored.
struct DrawStore {
  ChainOutput chain;
  int start_day = 0;
  std::vector<std::string> site_ids;
};

void save_draws(const std::string& path, const ChainOutput& out, int start_day,
                const std::vector<std::string>& site_ids);
DrawStore load_draws(const std::string& path);

// ---- Diagnostics and summaries ----------------------------------------------

struct EssResult {
  double ess = 0.0;
  bool degenerate = false;  // constant trace: ess reported as the length
};

// Effective sample size via the initial-monotone-positive-sequence
// autocorrelation estimator.  Requires at least 10 draws.
EssResult ess(const Eigen::VectorXd& trace);

struct LagHpd {
  std::vector<int> lags;  // sorted
  double mass = 0.0;      // probability carried by the set
  bool contiguous = false;
};

// Smallest set of lag values with total probability >= level, built greedily
// by probability; ties prefer values adjacent to the current set, then the
// lower lag.  Sets are nested across levels by construction.
LagHpd hpd_discrete(const Eigen::VectorXd& histogram, double level);

struct CurveSummary {
  Eigen::VectorXd mean, q025, q500, q975;  // one entry per grid day
};

struct CurveSummaries {
  CurveSummary gamma;                  // transfer coefficient
  CurveSummary mu;                     // mean exposure curve
  std::vector<CurveSummary> exposure;  // latent exposure per site
  std::vector<CurveSummary> fitted_y;  // fitted positivity per site
};

// Pools all chains and computes pointwise means and (2.5, 50, 97.5)%
// quantiles.  Values are sorted per grid point before any arithmetic, so the
// result is exactly invariant to chain order.  Requires >= 1 retained draw.
CurveSummaries summarize_curves(const std::vector<ChainOutput>& outputs, const Grid& grid);

struct MuGammaHist {
  Eigen::MatrixXi counts;  // rows: mu bins, cols: gamma bins; sums to grid size
  double mu_lo = 0, mu_hi = 0, gamma_lo = 0, gamma_hi = 0;
};

// Joint histogram of (posterior-mean mu(t), posterior-mean gamma(t)) pairs
// over grid days, ignoring the time index.
MuGammaHist mu_gamma_density(const std::vector<ChainOutput>& outputs, const Grid& grid,
                             int bins);

// Lag posterior pooled over chains, normalized.
Eigen::VectorXd pooled_lag_probabilities(const std::vector<ChainOutput>& outputs);

// ---- Stable CSV emission (shared by the CLI and re-summarization) ------------

// Shortest round-trip decimal form (%.17g-equivalent via std::to_chars).
std::string csv_double(double v);

// curve,site_id,time,mean,q2.5,q50,q97.5 — site_id empty for gamma and mu.
std::string curve_summaries_csv(const CurveSummaries& s, const Grid& grid,
                                const std::vector<std::string>& site_ids);
// lag,probability
std::string lag_posterior_csv(const Eigen::VectorXd& probabilities);
// level,mass,contiguous,lags (semicolon-joined) over a fixed ladder of
// credibility levels (50, 80, 95, 99%); the sets are nested down the rows.
std::string lag_hpd_csv(const Eigen::VectorXd& probabilities);
// mu_center,gamma_center,count for every bin
std::string mu_gamma_csv(const MuGammaHist& h, int bins);
// chain,series,ess,degenerate for the three scalar traces per chain plus a
// pooled row (sum of chain ESS); traces shorter than 10 draws are skipped.
std::string ess_table_csv(const std::vector<ChainOutput>& outputs);

}  // namespace sfcr
