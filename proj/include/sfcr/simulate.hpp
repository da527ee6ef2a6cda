#pragma once

#include <cstdint>

#include "sfcr/model.hpp"

namespace sfcr {

// Observation pattern for synthetic data.
struct SimSchedule {
  int x_period = 7;              // concentration sampled every x_period days
  int y_period = 1;              // positivity sampled every y_period days
  double y_tail_missing = 0.0;   // fraction of the final days with no y anywhere
  double y_random_missing = 0.0; // iid drop probability for remaining y days
  std::vector<int> holdout_sites;  // sites whose y series is withheld entirely
  bool clamp_y = true;           // clip sampled positivity into [0, 1]
};

// Scale knobs for the built-in ground truth.
struct SimTruth {
  int lag = -1;  // -1 resolves to min(8, max_lag)
  double sigma_eps_x = 0.15;
  double sigma_eps_y = 0.012;
  double sigma_theta = 0.02;
  double gamma_level = 0.022;
  double gamma_wave = 0.008;
  double x_level = 7.0;
};

// A synthetic problem instance: everything a fit needs plus the truth that
// generated it.
struct Simulation {
  Hyperparams hp;  // resolved
  Bases bases;
  std::vector<Region> regions;
  SpatialGraph graph;
  ModelState truth;
  Dataset data;
};

// Square-lattice site footprints (1 km squares, ids "site00", "site01", ...).
std::vector<Region> lattice_regions(int n);

// Builds a synthetic instance on a daily grid of num_days days: lattice
// geography, a smooth seasonal exposure truth expressed exactly in the model's
// own bases, and observations under `sched`.  Deterministic per seed (one RNG,
// fixed draw order: site phases, residual scores, then per-site y/x noise).
Simulation simulate(const Hyperparams& hp, int n, int num_days, const SimSchedule& sched,
                    std::uint64_t seed, const SimTruth& knobs = {});

// As simulate(), but observes a caller-supplied ground truth instead of
// constructing one.
Simulation simulate_given(const Hyperparams& hp, int n, int num_days, const SimSchedule& sched,
                          std::uint64_t seed, const ModelState& truth);

// Replaces every observed value in `data` with a fresh draw given `state`,
// keeping the observation pattern.  Used by prior/posterior calibration
// checks that need y|state resampled in place.
void redraw_observations(Dataset& data, const ModelState& state, const Bases& bases, Rng& rng,
                         bool clamp_y);

}  // namespace sfcr
