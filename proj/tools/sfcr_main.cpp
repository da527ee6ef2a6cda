// sfcr — Bayesian spatial functional regression of positivity rates on lagged
// wastewater concentration curves.  Subcommands: simulate, fit, summarize,
// graph.  Every flag can also come from an INI/TOML --config file; flags win.
// Exit codes: 0 ok, 2 input error, 3 config error, 4 sampler failure.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfcr/cli.hpp"
#include "sfcr/error.hpp"

namespace {

void add_hyperparam_flags(CLI::App* cmd, sfcr::Hyperparams& hp) {
  cmd->add_option("--factors", hp.num_factors, "Exposure factors K");
  cmd->add_option("--resid-factors", hp.num_resid_factors, "Residual-process factors L");
  cmd->add_option("--gamma-basis", hp.gamma_basis,
                  "Coefficient-curve B-spline size (0: derive from the grid)");
  cmd->add_option("--exposure-basis", hp.exposure_basis, "Exposure loading basis size");
  cmd->add_option("--resid-basis", hp.resid_basis,
                  "Residual loading basis size (0: derive from the grid)");
  cmd->add_option("--max-lag", hp.max_lag, "Largest candidate reporting lag in days");
  cmd->add_option("--a-eps-x", hp.a_eps_x, "Gamma prior shape, x error precision");
  cmd->add_option("--b-eps-x", hp.b_eps_x, "Gamma prior rate, x error precision");
  cmd->add_option("--a-eps-y", hp.a_eps_y, "Gamma prior shape, y error precision");
  cmd->add_option("--b-eps-y", hp.b_eps_y, "Gamma prior rate, y error precision");
  cmd->add_option("--a-theta", hp.a_theta, "Gamma prior shape, residual scale precisions");
  cmd->add_option("--b-theta", hp.b_theta, "Gamma prior rate, residual scale precisions");
  cmd->add_option("--lambda-half-upper", hp.lambda_half_upper,
                  "Upper bound of the uniform prior on lambda^-1/2");
  cmd->add_option("--nu-lower", hp.nu_lower, "Lower bound for the score-tail df");
  cmd->add_option("--nu-upper", hp.nu_upper, "Upper bound for the score-tail df");
  cmd->add_option("--penalty-ridge", hp.penalty_ridge,
                  "Ridge added to basis penalties (makes curve priors proper)");
  cmd->add_flag("--no-orthonormal-loadings{false}", hp.orthonormal_loadings,
                "Sample loadings without the orthonormality constraint");
  cmd->add_option("--slice-width", hp.slice_width, "Slice sampler initial bracket width");
  cmd->add_option("--slice-max-stepout", hp.slice_max_stepout,
                  "Slice sampler step-out limit");
}

void add_run_flags(CLI::App* cmd, sfcr::RunConfig& run) {
  cmd->add_option("--iterations", run.iterations, "Gibbs sweeps per chain");
  cmd->add_option("--burn-in", run.burn_in, "Sweeps discarded before retention");
  cmd->add_option("--thin", run.thin, "Keep one draw per this many sweeps");
  cmd->add_option("--chains", run.chains, "Independent chains");
  cmd->add_option("--seed", run.seed, "Base RNG seed");
  cmd->add_option("--checkpoint-every", run.checkpoint_every,
                  "Sweeps between resume checkpoints (0 disables)");
  cmd->add_option("--neighbors", run.neighbors, "kNN degree of the spatial graph");
  cmd->add_option("--quantile", run.hausdorff_quantile,
                  "Quantile of the extended Hausdorff distance");
  cmd->add_option("--resolution", run.resolution,
                  "Boundary sampling spacing (0: derive from the joint extent)");
}

int report(const sfcr::Error& e, int code) {
  std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial functional concurrent regression with an unknown reporting lag"};
  app.require_subcommand(1);
  sfcr::SimulateOptions sim;
  sfcr::FitOptions fit;
  sfcr::SummarizeOptions sum;
  sfcr::GraphOptions graph;
  std::string fit_manifest;

  CLI::App* c_sim = app.add_subcommand("simulate", "Write a synthetic dataset with its truth");
  c_sim->set_config("--config");
  c_sim->add_option("--out", sim.out_dir, "Output directory")->required();
  c_sim->add_option("--sites", sim.sites, "Number of sites");
  c_sim->add_option("--days", sim.days, "Days on the observation grid");
  c_sim->add_option("--seed", sim.seed, "RNG seed");
  c_sim->add_option("--day0", sim.day0_date, "Calendar date of grid day 0 (YYYY-MM-DD)");
  c_sim->add_option("--x-period", sim.schedule.x_period, "Days between concentration samples");
  c_sim->add_option("--y-period", sim.schedule.y_period, "Days between positivity samples");
  c_sim->add_option("--y-tail-missing", sim.schedule.y_tail_missing,
                    "Fraction of final days with no positivity anywhere");
  c_sim->add_option("--y-random-missing", sim.schedule.y_random_missing,
                    "Random positivity drop probability");
  c_sim->add_option("--holdout", sim.schedule.holdout_sites,
                    "Site indices whose positivity series is withheld");
  c_sim->add_flag("--no-clamp-y{false}", sim.schedule.clamp_y,
                  "Keep sampled positivity unclamped (may leave [0, 1])");
  c_sim->add_option("--lag", sim.truth.lag, "True lag (-1: min(8, max_lag))");
  c_sim->add_option("--sigma-eps-x", sim.truth.sigma_eps_x, "Concentration noise sd");
  c_sim->add_option("--sigma-eps-y", sim.truth.sigma_eps_y, "Positivity noise sd");
  c_sim->add_option("--sigma-theta", sim.truth.sigma_theta, "Residual-process scale");
  c_sim->add_option("--gamma-level", sim.truth.gamma_level, "Transfer coefficient level");
  c_sim->add_option("--gamma-wave", sim.truth.gamma_wave, "Transfer coefficient wobble");
  c_sim->add_option("--x-level", sim.truth.x_level, "Log-concentration level");
  add_hyperparam_flags(c_sim, sim.hp);

  CLI::App* c_fit = app.add_subcommand("fit", "Run the sampler on CSV + GeoJSON inputs");
  c_fit->set_config("--config");
  auto* m_opt = c_fit->add_option("--manifest", fit_manifest,
                                  "Rerun a recorded fit (replaces input/config flags)");
  auto* y_opt = c_fit->add_option("-y,--y-csv", fit.y_csv, "Positivity CSV")->excludes(m_opt);
  auto* x_opt = c_fit->add_option("-x,--x-csv", fit.x_csv, "Concentration CSV")->excludes(m_opt);
  auto* g_opt = c_fit->add_option("--geo", fit.geo, "GeoJSON site regions")->excludes(m_opt);
  m_opt->excludes(y_opt)->excludes(x_opt)->excludes(g_opt);
  c_fit->add_option("--out", fit.out_dir, "Output directory")->required();
  c_fit->add_option("--min-positives", fit.rules.min_positives,
                    "Positive-count threshold below which a day is missing");
  c_fit->add_option("--id-property", fit.rules.id_property,
                    "GeoJSON property holding site ids");
  c_fit->add_flag("--allow-geographic", fit.rules.allow_geographic,
                  "Accept degree-scale coordinates without complaint");
  c_fit->add_option("--bins", fit.mu_gamma_bins, "Exposure/transfer histogram bins per axis");
  add_hyperparam_flags(c_fit, fit.hp);
  add_run_flags(c_fit, fit.run);

  CLI::App* c_sum = app.add_subcommand("summarize",
                                       "Regenerate summaries from stored chain draws");
  c_sum->set_config("--config");
  c_sum->add_option("--draws", sum.draw_files, "Chain draw stores (chainN_draws.bin)")
      ->required();
  c_sum->add_option("--out", sum.out_dir, "Output directory")->required();
  c_sum->add_option("--bins", sum.mu_gamma_bins, "Exposure/transfer histogram bins per axis");

  CLI::App* c_graph = app.add_subcommand("graph", "Emit the spatial graph for a geometry");
  c_graph->set_config("--config");
  c_graph->add_option("--geo", graph.geo, "GeoJSON site regions")->required();
  c_graph->add_option("--out", graph.out_dir, "Output directory")->required();
  c_graph->add_option("--neighbors", graph.neighbors, "kNN degree");
  c_graph->add_option("--quantile", graph.hausdorff_quantile,
                      "Quantile of the extended Hausdorff distance");
  c_graph->add_option("--resolution", graph.resolution,
                      "Boundary sampling spacing (0: derive from the joint extent)");
  c_graph->add_option("--id-property", graph.id_property, "GeoJSON property holding site ids");
  c_graph->add_flag("--allow-geographic", graph.allow_geographic,
                    "Accept degree-scale coordinates without complaint");

  try {
    app.parse(argc, argv);
    if (c_sim->parsed()) {
      sim.out_dir = sfcr::resolve_out_dir(sim.out_dir);
      return sfcr::cmd_simulate(sim);
    }
    if (c_fit->parsed()) {
      if (!fit_manifest.empty()) {
        const std::string out = fit.out_dir;
        fit = sfcr::fit_options_from_manifest(fit_manifest);
        fit.out_dir = out;
      }
      fit.out_dir = sfcr::resolve_out_dir(fit.out_dir);
      return sfcr::cmd_fit(fit);
    }
    if (c_sum->parsed()) {
      sum.out_dir = sfcr::resolve_out_dir(sum.out_dir);
      return sfcr::cmd_summarize(sum);
    }
    graph.out_dir = sfcr::resolve_out_dir(graph.out_dir);
    return sfcr::cmd_graph(graph);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  } catch (const sfcr::SamplerError& e) {
    return report(e, 4);
  } catch (const sfcr::ConfigError& e) {
    return report(e, 3);
  } catch (const sfcr::InputError& e) {
    return report(e, 2);
  } catch (const sfcr::Error& e) {
    return report(e, 2);
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}
