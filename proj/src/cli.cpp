#include "sfcr/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfcr/error.hpp"
#include "sfcr/geojson.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace sfcr {

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("digest", "cannot open '" + path + "'");
  std::uint64_t h = 14695981039346656037ull;  // FNV-1a 64 offset basis
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

std::string resolve_out_dir(const std::string& dir) {
  const char* root = std::getenv("SFCR_OUT_ROOT");
  if (!root || !*root || dir.empty() || fs::path(dir).is_absolute()) return dir;
  return (fs::path(root) / dir).string();
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("output", "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out.good()) throw InputError("output", "failed writing '" + path.string() + "'");
}

json parse_json_file(const std::string& path, const char* code) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(code, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(code, "'" + path + "': " + e.what());
  }
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// ---- config <-> json (manifest vocabulary) -----------------------------------

json hp_json(const Hyperparams& hp) {
  return json{{"num_factors", hp.num_factors},
              {"num_resid_factors", hp.num_resid_factors},
              {"gamma_basis", hp.gamma_basis},
              {"exposure_basis", hp.exposure_basis},
              {"resid_basis", hp.resid_basis},
              {"max_lag", hp.max_lag},
              {"a_eps_x", hp.a_eps_x},
              {"b_eps_x", hp.b_eps_x},
              {"a_eps_y", hp.a_eps_y},
              {"b_eps_y", hp.b_eps_y},
              {"a_theta", hp.a_theta},
              {"b_theta", hp.b_theta},
              {"lambda_half_upper", hp.lambda_half_upper},
              {"nu_lower", hp.nu_lower},
              {"nu_upper", hp.nu_upper},
              {"penalty_ridge", hp.penalty_ridge},
              {"orthonormal_loadings", hp.orthonormal_loadings},
              {"slice_width", hp.slice_width},
              {"slice_max_stepout", hp.slice_max_stepout}};
}

Hyperparams hp_from(const json& j) {
  Hyperparams hp;
  hp.num_factors = j.at("num_factors").get<int>();
  hp.num_resid_factors = j.at("num_resid_factors").get<int>();
  hp.gamma_basis = j.at("gamma_basis").get<int>();
  hp.exposure_basis = j.at("exposure_basis").get<int>();
  hp.resid_basis = j.at("resid_basis").get<int>();
  hp.max_lag = j.at("max_lag").get<int>();
  hp.a_eps_x = j.at("a_eps_x").get<double>();
  hp.b_eps_x = j.at("b_eps_x").get<double>();
  hp.a_eps_y = j.at("a_eps_y").get<double>();
  hp.b_eps_y = j.at("b_eps_y").get<double>();
  hp.a_theta = j.at("a_theta").get<double>();
  hp.b_theta = j.at("b_theta").get<double>();
  hp.lambda_half_upper = j.at("lambda_half_upper").get<double>();
  hp.nu_lower = j.at("nu_lower").get<double>();
  hp.nu_upper = j.at("nu_upper").get<double>();
  hp.penalty_ridge = j.at("penalty_ridge").get<double>();
  hp.orthonormal_loadings = j.at("orthonormal_loadings").get<bool>();
  hp.slice_width = j.at("slice_width").get<double>();
  hp.slice_max_stepout = j.at("slice_max_stepout").get<int>();
  return hp;
}

// checkpoint_dir is where the fit writes, not part of the recorded config.
json run_json(const RunConfig& cfg) {
  return json{{"iterations", cfg.iterations},
              {"burn_in", cfg.burn_in},
              {"thin", cfg.thin},
              {"chains", cfg.chains},
              {"seed", cfg.seed},
              {"checkpoint_every", cfg.checkpoint_every},
              {"neighbors", cfg.neighbors},
              {"hausdorff_quantile", cfg.hausdorff_quantile},
              {"resolution", cfg.resolution}};
}

RunConfig run_from(const json& j) {
  RunConfig cfg;
  cfg.iterations = j.at("iterations").get<int>();
  cfg.burn_in = j.at("burn_in").get<int>();
  cfg.thin = j.at("thin").get<int>();
  cfg.chains = j.at("chains").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.checkpoint_every = j.at("checkpoint_every").get<int>();
  cfg.neighbors = j.at("neighbors").get<int>();
  cfg.hausdorff_quantile = j.at("hausdorff_quantile").get<double>();
  cfg.resolution = j.at("resolution").get<double>();
  return cfg;
}

// extension is not recorded: fits derive it from max_lag.
json rules_json(const IngestRules& r) {
  return json{{"min_positives", r.min_positives},
              {"id_property", r.id_property},
              {"allow_geographic", r.allow_geographic}};
}

IngestRules rules_from(const json& j) {
  IngestRules r;
  r.min_positives = j.at("min_positives").get<int>();
  r.id_property = j.at("id_property").get<std::string>();
  r.allow_geographic = j.at("allow_geographic").get<bool>();
  return r;
}

json input_entry(const std::string& path) {
  return json{{"path", path}, {"fnv1a64", file_digest(path)}};
}

// Completes and writes manifest.json: digests every named output in out_dir,
// stamps kind/version/tool, and attaches wall-clock timings.
void write_manifest(const fs::path& out_dir, json m, const std::vector<std::string>& outputs,
                    json timings) {
  json digests = json::object();
  for (const auto& name : outputs) digests[name] = file_digest((out_dir / name).string());
  m["kind"] = "sfcr-manifest";
  m["version"] = 1;
  m["tool"] = kToolVersion;
  m["outputs"] = std::move(digests);
  m["timings_seconds"] = std::move(timings);
  write_text(out_dir / "manifest.json", m.dump(2) + "\n");
}

std::string chain_name(int chain, const char* suffix) {
  return "chain" + std::to_string(chain) + "_" + suffix;
}

}  // namespace

// ---- simulate -----------------------------------------------------------------

int cmd_simulate(const SimulateOptions& opt) {
  const auto t0 = Clock::now();
  if (opt.out_dir.empty()) throw ConfigError("simulate", "out_dir is required");
  if (opt.sites < 2) throw ConfigError("simulate", "scenario.sites: need at least 2 sites");
  if (opt.days < 2) throw ConfigError("simulate", "scenario.days: need at least 2 days");
  if (opt.schedule.x_period < 1 || opt.schedule.y_period < 1)
    throw ConfigError("simulate", "scenario.x_period/y_period: sampling periods must be >= 1");
  if (opt.schedule.y_tail_missing < 0 || opt.schedule.y_tail_missing >= 1 ||
      opt.schedule.y_random_missing < 0 || opt.schedule.y_random_missing >= 1)
    throw ConfigError("simulate", "scenario.y_tail_missing/y_random_missing: need [0, 1)");
  for (const int s : opt.schedule.holdout_sites)
    if (s < 0 || s >= opt.sites)
      throw ConfigError("simulate", "scenario.holdout_sites: index " + std::to_string(s) +
                                        " outside [0, " + std::to_string(opt.sites) + ")");
  if (opt.truth.lag > opt.hp.max_lag)
    throw ConfigError("simulate", "scenario.lag: " + std::to_string(opt.truth.lag) +
                                      " exceeds max_lag " + std::to_string(opt.hp.max_lag));
  const int day0 = parse_iso_date(opt.day0_date);

  const Simulation sim = simulate(opt.hp, opt.sites, opt.days, opt.schedule, opt.seed, opt.truth);

  fs::create_directories(opt.out_dir);
  const fs::path dir = opt.out_dir;

  const auto series_csv = [&](const std::vector<SiteSeries>& all) {
    std::string out = "site_id,date,value\n";
    for (int i = 0; i < sim.data.n(); ++i)
      for (int j = 0; j < all[i].count(); ++j)
        out += sim.data.site_ids[i] + "," +
               format_iso_date(day0 + sim.data.grid.day(all[i].idx[j])) + "," +
               csv_double(all[i].values[j]) + "\n";
    return out;
  };
  write_text(dir / "y.csv", series_csv(sim.data.y));
  write_text(dir / "x.csv", series_csv(sim.data.x));
  write_text(dir / "geo.geojson", regions_to_geojson(sim.regions));

  // Truth bundle: what the generator drew, as curves on the main grid.
  const DerivedCurves truth = derive_curves(sim.truth, sim.bases);
  const int M = sim.data.grid.size();
  const int ext = sim.data.grid.extension;
  json tj;
  tj["kind"] = "sfcr-truth";
  tj["version"] = 1;
  tj["day0_date"] = opt.day0_date;
  tj["grid"] = json{{"start_day", sim.data.grid.start_day},
                    {"num_days", M},
                    {"extension", ext}};
  tj["site_ids"] = sim.data.site_ids;
  tj["lag"] = sim.truth.lag;
  tj["sigma2_eps_x"] = sim.truth.sigma2_eps_x;
  tj["sigma2_eps_y"] = sim.truth.sigma2_eps_y;
  tj["sigma2_theta"] = to_std(sim.truth.sigma2_theta);
  tj["gamma"] = to_std(truth.gamma_curve);
  tj["exposure_mean"] = to_std(truth.exposure_mean.segment(ext, M));
  json exposure = json::array(), fitted = json::array();
  for (int i = 0; i < sim.data.n(); ++i) {
    exposure.push_back(to_std(truth.exposure.col(i).segment(ext, M)));
    fitted.push_back(to_std(truth.fitted_y.col(i)));
  }
  tj["exposure"] = std::move(exposure);
  tj["fitted_y"] = std::move(fitted);
  write_text(dir / "truth.json", tj.dump(2) + "\n");

  json m;
  m["command"] = "simulate";
  m["seed"] = opt.seed;
  m["day0_date"] = opt.day0_date;
  m["hyperparams"] = hp_json(opt.hp);
  m["scenario"] = json{{"sites", opt.sites},
                       {"days", opt.days},
                       {"x_period", opt.schedule.x_period},
                       {"y_period", opt.schedule.y_period},
                       {"y_tail_missing", opt.schedule.y_tail_missing},
                       {"y_random_missing", opt.schedule.y_random_missing},
                       {"holdout_sites", opt.schedule.holdout_sites},
                       {"clamp_y", opt.schedule.clamp_y},
                       {"lag", opt.truth.lag},
                       {"sigma_eps_x", opt.truth.sigma_eps_x},
                       {"sigma_eps_y", opt.truth.sigma_eps_y},
                       {"sigma_theta", opt.truth.sigma_theta},
                       {"gamma_level", opt.truth.gamma_level},
                       {"gamma_wave", opt.truth.gamma_wave},
                       {"x_level", opt.truth.x_level}};
  write_manifest(dir, std::move(m), {"y.csv", "x.csv", "geo.geojson", "truth.json"},
                 json{{"total", seconds_between(t0, Clock::now())}});
  return 0;
}

// ---- fit ----------------------------------------------------------------------

int cmd_fit(const FitOptions& opt) {
  const auto t0 = Clock::now();
  if (opt.out_dir.empty()) throw ConfigError("fit", "out_dir is required");
  if (opt.y_csv.empty() || opt.x_csv.empty() || opt.geo.empty())
    throw ConfigError("fit", "y_csv, x_csv and geo input paths are all required");
  if (opt.mu_gamma_bins < 1) throw ConfigError("fit", "mu_gamma_bins must be positive");
  IngestRules rules = opt.rules;
  rules.extension = opt.hp.max_lag;
  const IngestResult ing = ingest(opt.y_csv, opt.x_csv, opt.geo, rules);

  RunConfig cfg = opt.run;
  cfg.validate();
  if (cfg.retained() < 1)
    throw ConfigError("run", "no retained draws to summarize: lower burn_in, raise "
                             "iterations, or lower thin");
  fs::create_directories(opt.out_dir);
  cfg.checkpoint_dir = opt.out_dir;
  const auto t1 = Clock::now();
  const std::vector<ChainOutput> outputs = run(ing.data, opt.hp, cfg);
  const auto t2 = Clock::now();

  const fs::path dir = opt.out_dir;
  const Grid& grid = ing.data.grid;
  const CurveSummaries cs = summarize_curves(outputs, grid);
  const Eigen::VectorXd probs = pooled_lag_probabilities(outputs);
  write_text(dir / "curve_summaries.csv", curve_summaries_csv(cs, grid, ing.data.site_ids));
  write_text(dir / "lag_posterior.csv", lag_posterior_csv(probs));
  write_text(dir / "lag_hpd.csv", lag_hpd_csv(probs));
  write_text(dir / "mu_gamma.csv",
             mu_gamma_csv(mu_gamma_density(outputs, grid, opt.mu_gamma_bins), opt.mu_gamma_bins));
  write_text(dir / "ess.csv", ess_table_csv(outputs));

  json m;
  m["command"] = "fit";
  m["seed"] = cfg.seed;
  m["day0_date"] = ing.day0_date();
  m["inputs"] = json{{"y_csv", input_entry(opt.y_csv)},
                     {"x_csv", input_entry(opt.x_csv)},
                     {"geo", input_entry(opt.geo)}};
  m["hyperparams"] = hp_json(opt.hp.resolved(grid));
  m["run"] = run_json(cfg);
  m["ingest"] = rules_json(rules);
  m["summaries"] = json{{"mu_gamma_bins", opt.mu_gamma_bins}};
  std::vector<std::string> files = {"curve_summaries.csv", "lag_posterior.csv", "lag_hpd.csv",
                                    "mu_gamma.csv", "ess.csv"};
  for (int c = 0; c < cfg.chains; ++c) {
    files.push_back(chain_name(c, "state.json"));
    files.push_back(chain_name(c, "draws.bin"));
  }
  const auto t3 = Clock::now();
  write_manifest(dir, std::move(m), files,
                 json{{"ingest", seconds_between(t0, t1)},
                      {"sample", seconds_between(t1, t2)},
                      {"summaries", seconds_between(t2, t3)},
                      {"total", seconds_between(t0, t3)}});
  return 0;
}

FitOptions fit_options_from_manifest(const std::string& manifest_path) {
  const json m = parse_json_file(manifest_path, "manifest");
  try {
    if (m.at("kind").get<std::string>() != "sfcr-manifest")
      throw InputError("manifest", "'" + manifest_path + "' is not a run manifest");
    if (m.at("version").get<int>() != 1)
      throw ConfigError("manifest", "unsupported manifest version in '" + manifest_path + "'");
    if (m.at("command").get<std::string>() != "fit")
      throw InputError("manifest", "'" + manifest_path + "' records command '" +
                                       m.at("command").get<std::string>() + "', expected fit");
    FitOptions opt;
    const auto input = [&](const char* role, std::string& dst) {
      const json& entry = m.at("inputs").at(role);
      dst = entry.at("path").get<std::string>();
      const std::string want = entry.at("fnv1a64").get<std::string>();
      const std::string got = file_digest(dst);
      if (got != want)
        throw InputError("manifest", "input '" + dst + "' no longer matches the manifest (" +
                                         got + " != recorded " + want + ")");
    };
    input("y_csv", opt.y_csv);
    input("x_csv", opt.x_csv);
    input("geo", opt.geo);
    opt.hp = hp_from(m.at("hyperparams"));
    opt.run = run_from(m.at("run"));
    opt.rules = rules_from(m.at("ingest"));
    opt.rules.extension = opt.hp.max_lag;
    opt.mu_gamma_bins = m.at("summaries").at("mu_gamma_bins").get<int>();
    return opt;
  } catch (const json::exception& e) {
    throw InputError("manifest", "'" + manifest_path + "': " + e.what());
  }
}

// ---- summarize ------------------------------------------------------------------

int cmd_summarize(const SummarizeOptions& opt) {
  const auto t0 = Clock::now();
  if (opt.out_dir.empty()) throw ConfigError("summarize", "out_dir is required");
  if (opt.mu_gamma_bins < 1) throw ConfigError("summarize", "mu_gamma_bins must be positive");
  if (opt.draw_files.empty())
    throw InputError("draws", "no draw stores given: pass at least one chain draw file");

  std::vector<DrawStore> stores;
  stores.reserve(opt.draw_files.size());
  for (const auto& f : opt.draw_files) stores.push_back(load_draws(f));
  // Compatibility key copied out before the chains are moved below.
  const int M = static_cast<int>(stores.front().chain.gamma_draws.cols());
  const int start_day = stores.front().start_day;
  const Eigen::Index num_lags = stores.front().chain.lag_counts.size();
  const std::vector<std::string> site_ids = stores.front().site_ids;
  std::vector<ChainOutput> outputs;
  outputs.reserve(stores.size());
  for (auto& s : stores) {
    if (s.chain.gamma_draws.cols() != M || s.start_day != start_day ||
        s.site_ids != site_ids || s.chain.lag_counts.size() != num_lags)
      throw ConfigError("draws",
                        "incompatible draw stores: day grids, site sets, or lag ranges differ");
    outputs.push_back(std::move(s.chain));
  }
  const Grid grid{start_day, M, 0};

  fs::create_directories(opt.out_dir);
  const fs::path dir = opt.out_dir;
  const CurveSummaries cs = summarize_curves(outputs, grid);
  const Eigen::VectorXd probs = pooled_lag_probabilities(outputs);
  write_text(dir / "curve_summaries.csv", curve_summaries_csv(cs, grid, site_ids));
  write_text(dir / "lag_posterior.csv", lag_posterior_csv(probs));
  write_text(dir / "lag_hpd.csv", lag_hpd_csv(probs));
  write_text(dir / "mu_gamma.csv",
             mu_gamma_csv(mu_gamma_density(outputs, grid, opt.mu_gamma_bins), opt.mu_gamma_bins));
  write_text(dir / "ess.csv", ess_table_csv(outputs));

  json m;
  m["command"] = "summarize";
  json inputs = json::object();
  for (const auto& f : opt.draw_files) inputs[fs::path(f).filename().string()] = input_entry(f);
  m["inputs"] = std::move(inputs);
  m["summaries"] = json{{"mu_gamma_bins", opt.mu_gamma_bins}};
  write_manifest(dir, std::move(m),
                 {"curve_summaries.csv", "lag_posterior.csv", "lag_hpd.csv", "mu_gamma.csv",
                  "ess.csv"},
                 json{{"total", seconds_between(t0, Clock::now())}});
  return 0;
}

// ---- graph --------------------------------------------------------------------

int cmd_graph(const GraphOptions& opt) {
  const auto t0 = Clock::now();
  if (opt.out_dir.empty()) throw ConfigError("graph", "out_dir is required");
  if (opt.neighbors < 1) throw ConfigError("graph", "neighbors must be at least 1");
  const std::vector<Region> regions = load_geojson(opt.geo, opt.id_property);
  require_planar(regions, opt.allow_geographic);
  if (regions.size() < 2) throw GeometryError("need at least 2 regions to build a graph");
  const int k = std::min(opt.neighbors, static_cast<int>(regions.size()) - 1);
  const SpatialGraph g = knn_weights(regions, k, opt.hausdorff_quantile, opt.resolution);

  fs::create_directories(opt.out_dir);
  const fs::path dir = opt.out_dir;
  std::string ids = "site_id\n";
  for (const auto& id : g.ids) ids += id + "\n";
  write_text(dir / "ids.csv", ids);
  const auto matrix_csv = [](const Eigen::MatrixXd& mat) {
    std::string out;
    for (int r = 0; r < mat.rows(); ++r) {
      for (int c = 0; c < mat.cols(); ++c) {
        if (c) out += ',';
        out += csv_double(mat(r, c));
      }
      out += '\n';
    }
    return out;
  };
  write_text(dir / "D.csv", matrix_csv(g.D));
  write_text(dir / "Q.csv", matrix_csv(g.Q));

  json m;
  m["command"] = "graph";
  m["inputs"] = json{{"geo", input_entry(opt.geo)}};
  m["spatial"] = json{{"neighbors", opt.neighbors},
                      {"effective_neighbors", k},
                      {"hausdorff_quantile", opt.hausdorff_quantile},
                      {"resolution", opt.resolution},
                      {"id_property", opt.id_property},
                      {"allow_geographic", opt.allow_geographic},
                      {"connected", g.connected},
                      {"jitter", g.jitter}};
  write_manifest(dir, std::move(m), {"ids.csv", "D.csv", "Q.csv"},
                 json{{"total", seconds_between(t0, Clock::now())}});
  return 0;
}

}  // namespace sfcr
