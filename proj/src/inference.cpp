#include "sfcr/inference.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <thread>

#include "json.hpp"
#include "sfcr/gibbs.hpp"

namespace sfcr {
namespace {

using nlohmann::json;

// splitmix64 finalizer: decorrelates chain streams even for adjacent seeds.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t chain_seed(std::uint64_t seed, int chain) {
  return mix64(seed ^ mix64(static_cast<std::uint64_t>(chain) + 1));
}

// Per-site linear interpolation of the x observations onto the extended grid,
// with flat extrapolation outside the observed range.
Eigen::MatrixXd interpolated_x(const Dataset& data) {
  const int ext = data.grid.extension;
  const int rows = data.grid.ext_size();
  Eigen::MatrixXd out(rows, data.n());
  for (int i = 0; i < data.n(); ++i) {
    const SiteSeries& s = data.x[i];
    int seg = 0;  // obs index of the segment's left end
    for (int r = 0; r < rows; ++r) {
      const double t = static_cast<double>(r - ext);  // main-grid day
      while (seg + 1 < s.count() && s.idx[seg + 1] <= t) ++seg;
      if (t <= s.idx[0]) {
        out(r, i) = s.values[0];
      } else if (seg + 1 >= s.count()) {
        out(r, i) = s.values[s.count() - 1];
      } else {
        const double t0 = s.idx[seg], t1 = s.idx[seg + 1];
        const double w = (t - t0) / (t1 - t0);
        out(r, i) = (1.0 - w) * s.values[seg] + w * s.values[seg + 1];
      }
    }
  }
  return out;
}

void record_draw(ChainOutput& out, int d, const ModelState& st, const GibbsContext& ctx,
                 const Dataset& data, const Hyperparams& hp, const Bases& bases,
                 const SpatialGraph& graph) {
  const int ext = data.grid.extension;
  const int M = data.grid.size();
  const DerivedCurves curves = derive_curves(st, bases);
  out.lag_trace[d] = st.lag;
  out.sigma2_eps_y_trace[d] = st.sigma2_eps_y;
  out.sigma2_eps_x_trace[d] = st.sigma2_eps_x;
  out.log_joint_trace[d] = log_joint(st, data, hp, bases, graph).total();
  out.gamma_draws.row(d) = curves.gamma_curve.transpose();
  out.mu_curve_draws.row(d) = curves.exposure_mean.segment(ext, M).transpose();
  for (int i = 0; i < ctx.n(); ++i) {
    out.exposure_draws[i].row(d) = curves.exposure.col(i).segment(ext, M).transpose();
    out.fitted_y_draws[i].row(d) = curves.fitted_y.col(i).transpose();
  }
}

std::filesystem::path chain_file(const std::string& dir, int chain, const char* suffix) {
  return std::filesystem::path(dir) /
         ("chain" + std::to_string(chain) + "_" + suffix);
}

void run_chain(ChainOutput& out, const Dataset& data, const Hyperparams& hp,
               const Bases& bases, const SpatialGraph& graph, const RunConfig& config,
               const ModelState& init, int chain) {
  GibbsContext ctx(data, hp, bases, graph, chain_seed(config.seed, chain));
  ModelState st = init;

  const int D = config.retained();
  const int M = data.grid.size();
  out.chain_index = chain;
  out.lag_counts = Eigen::VectorXi::Zero(hp.max_lag + 1);
  out.lag_trace.assign(D, 0);
  out.sigma2_eps_y_trace.resize(D);
  out.sigma2_eps_x_trace.resize(D);
  out.log_joint_trace.resize(D);
  out.gamma_draws.resize(D, M);
  out.mu_curve_draws.resize(D, M);
  out.exposure_draws.assign(ctx.n(), Eigen::MatrixXd(D, M));
  out.fitted_y_draws.assign(ctx.n(), Eigen::MatrixXd(D, M));

  const bool writing = !config.checkpoint_dir.empty();
  auto snapshot = [&](int sweep_count) {
    Checkpoint ck;
    ck.chain_index = chain;
    ck.sweep = sweep_count;
    ck.seed = config.seed;
    ck.rng_state = ctx.rng.serialize();
    ck.state = st;
    return ck;
  };

  int d = 0;
  int t = 0;
  try {
    for (t = 1; t <= config.iterations; ++t) {
      sweep(st, ctx);
      if (t > config.burn_in && (t - config.burn_in - 1) % config.thin == 0) {
        record_draw(out, d, st, ctx, data, hp, bases, graph);
        ++d;
      }
      if (writing && config.checkpoint_every > 0 && t % config.checkpoint_every == 0)
        save_checkpoint(chain_file(config.checkpoint_dir, chain, "state.json").string(),
                        snapshot(t), hp);
    }
  } catch (const SamplerError& e) {
    // Abort contract: leave a diagnostic snapshot of the last completed sweep,
    // then surface the failure with its position in the run.
    if (writing)
      save_checkpoint(chain_file(config.checkpoint_dir, chain, "abort.json").string(),
                      snapshot(t - 1), hp);
    throw SamplerError("chain", "chain " + std::to_string(chain) + " failed at sweep " +
                                    std::to_string(t) + ": " + e.what());
  }

  for (int j = 0; j < D; ++j) ++out.lag_counts[out.lag_trace[j]];
  out.final_state = st;
  if (writing) {
    save_checkpoint(chain_file(config.checkpoint_dir, chain, "state.json").string(),
                    snapshot(config.iterations), hp);
    save_draws(chain_file(config.checkpoint_dir, chain, "draws.bin").string(), out,
               data.grid.start_day, data.site_ids);
  }
}

// ---- JSON helpers -----------------------------------------------------------

json vec_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    const Eigen::VectorXd row = m.row(r).transpose();
    rows.push_back(vec_json(row));
  }
  return rows;
}

Eigen::VectorXd vec_from(const json& j) {
  const auto vals = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<int>(vals.size()));
}

Eigen::MatrixXd mat_from(const json& j) {
  const int rows = static_cast<int>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(rows, static_cast<int>(j[0].size()));
  for (int r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = vec_from(j[r]);
    if (row.size() != m.cols())
      throw InputError("checkpoint", "ragged matrix rows in checkpoint");
    m.row(r) = row.transpose();
  }
  return m;
}

}  // namespace

void RunConfig::validate() const {
  if (iterations < 0 || burn_in < 0 || burn_in > iterations)
    throw ConfigError("run", "need 0 <= burn_in <= iterations");
  if (thin < 1) throw ConfigError("run", "thin must be at least 1");
  if (chains < 1) throw ConfigError("run", "need at least one chain");
  if (checkpoint_every < 0) throw ConfigError("run", "checkpoint_every must be nonnegative");
  if (neighbors < 1) throw ConfigError("run", "neighbors must be at least 1");
  if (!(hausdorff_quantile > 0.0) || hausdorff_quantile > 1.0)
    throw ConfigError("run", "hausdorff_quantile must lie in (0, 1]");
  if (resolution < 0.0) throw ConfigError("run", "resolution must be nonnegative");
}

ModelState initial_state(const Dataset& data, const Hyperparams& hp, const Bases& bases) {
  const int n = data.n();
  const int K = hp.num_factors;
  const int ext = data.grid.extension;
  ModelState st = make_state(hp, n);

  // Exposure factors: project interpolated x onto the (orthonormal) exposure
  // basis, then take leading left singular vectors of the coefficient matrix.
  const Eigen::MatrixXd xmat = interpolated_x(data);
  const Eigen::MatrixXd coef = bases.exposure_sys.eval.transpose() * xmat;  // H x n
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(coef, Eigen::ComputeThinU);
  const int have = std::min<int>(K, static_cast<int>(svd.matrixU().cols()));
  st.psi.leftCols(have) = svd.matrixU().leftCols(have);

  // With fewer sites than factors the SVD runs out of directions; extend with
  // Gram-Schmidt over canonical coordinates so the start stays orthonormal.
  for (int k = have; k < K; ++k) {
    for (int j = 0; j < st.psi.rows(); ++j) {
      Eigen::VectorXd cand = Eigen::VectorXd::Unit(st.psi.rows(), j);
      for (int k2 = 0; k2 < k; ++k2)
        cand -= st.psi.col(k2) * st.psi.col(k2).dot(cand);
      const double nrm = cand.norm();
      if (nrm > 1e-8) {
        st.psi.col(k) = cand / nrm;
        break;
      }
    }
  }

  const Eigen::MatrixXd scores = st.psi.transpose() * coef;  // K x n
  st.mu = scores.rowwise().mean();
  st.alpha = scores.colwise() - st.mu;

  // Residual loadings start at the leading (smoothest) basis directions:
  // deterministic, orthonormal, and nondegenerate for the constrained draws.
  // A zero start would hand the first phi update linearly dependent
  // orthogonality constraints.
  for (int l = 0; l < hp.num_resid_factors; ++l)
    st.phi.col(l) = Eigen::VectorXd::Unit(hp.resid_basis, l);

  // Method-of-moments error variances.  x: residual of the factor
  // reconstruction at observed days; y: spread around per-site means (the
  // zero-initialized transfer curve explains nothing yet).
  double sx = 0.0;
  int cx = 0;
  for (int i = 0; i < n; ++i) {
    const SiteSeries& s = data.x[i];
    for (int j = 0; j < s.count(); ++j) {
      const double fit =
          bases.exposure_sys.eval.row(s.idx[j] + ext) * (st.psi * st.beta(i));
      sx += (s.values[j] - fit) * (s.values[j] - fit);
      ++cx;
    }
  }
  st.sigma2_eps_x = std::max(1e-8, sx / std::max(1, cx));

  double sy = 0.0;
  int cy = 0;
  for (int i = 0; i < n; ++i) {
    const SiteSeries& s = data.y[i];
    if (s.count() == 0) continue;
    const double m = s.values.mean();
    for (int j = 0; j < s.count(); ++j) sy += (s.values[j] - m) * (s.values[j] - m);
    cy += s.count();
  }
  st.sigma2_eps_y = cy > 0 ? std::max(1e-8, sy / cy) : 1.0;

  // gamma, theta, and lag stay zero; smoothing/shrinkage parameters keep the
  // make_state defaults (all ones, above the truncation floor).
  return st;
}

std::vector<ChainOutput> run(const Dataset& data, const Hyperparams& hp,
                             const SpatialGraph& graph, const RunConfig& config,
                             const ModelState* init) {
  config.validate();
  data.validate(false);
  const Hyperparams rhp = hp.resolved(data.grid);
  rhp.validate(data.grid);
  const Bases bases = make_bases(data.grid, rhp);
  if (!config.checkpoint_dir.empty())
    std::filesystem::create_directories(config.checkpoint_dir);

  const ModelState start = init ? *init : initial_state(data, rhp, bases);
  start.validate(rhp, data.n());

  std::vector<ChainOutput> outputs(config.chains);
  std::vector<std::exception_ptr> failures(config.chains);
  std::vector<std::thread> workers;
  workers.reserve(config.chains);
  for (int c = 0; c < config.chains; ++c)
    workers.emplace_back([&, c]() {
      try {
        run_chain(outputs[c], data, rhp, bases, graph, config, start, c);
      } catch (...) {
        failures[c] = std::current_exception();
      }
    });
  for (auto& w : workers) w.join();
  for (int c = 0; c < config.chains; ++c)
    if (failures[c]) std::rethrow_exception(failures[c]);
  return outputs;
}

std::vector<ChainOutput> run(const Dataset& data, const Hyperparams& hp,
                             const RunConfig& config) {
  config.validate();
  const int k = std::min(config.neighbors, data.n() - 1);
  const SpatialGraph graph =
      knn_weights(data.regions, k, config.hausdorff_quantile, config.resolution);
  return run(data, hp, graph, config);
}

// ---- Checkpoints ------------------------------------------------------------

std::string checkpoint_to_json(const Checkpoint& ck, const Hyperparams& hp) {
  const ModelState& st = ck.state;
  json j;
  j["kind"] = "sfcr-chain-checkpoint";
  j["version"] = ck.version;
  j["chain"] = ck.chain_index;
  j["sweep"] = ck.sweep;
  j["seed"] = ck.seed;
  j["rng"] = ck.rng_state;
  j["dims"] = {{"n", st.num_sites()},
               {"gamma_basis", hp.gamma_basis},
               {"exposure_basis", hp.exposure_basis},
               {"resid_basis", hp.resid_basis},
               {"num_factors", hp.num_factors},
               {"num_resid_factors", hp.num_resid_factors},
               {"max_lag", hp.max_lag}};
  json s;
  s["gamma"] = vec_json(st.gamma);
  s["theta"] = mat_json(st.theta);
  s["phi"] = mat_json(st.phi);
  s["lag"] = st.lag;
  s["mu"] = vec_json(st.mu);
  s["alpha"] = mat_json(st.alpha);
  s["psi"] = mat_json(st.psi);
  s["sigma2_eps_x"] = st.sigma2_eps_x;
  s["sigma2_eps_y"] = st.sigma2_eps_y;
  s["sigma2_theta"] = vec_json(st.sigma2_theta);
  s["lambda_gamma"] = st.lambda_gamma;
  s["lambda_f"] = vec_json(st.lambda_f);
  s["lambda_g"] = vec_json(st.lambda_g);
  s["delta_mu"] = vec_json(st.delta_mu);
  s["delta_alpha"] = vec_json(st.delta_alpha);
  s["zeta"] = mat_json(st.zeta);
  s["nu_alpha"] = st.nu_alpha;
  s["a_mu1"] = st.a_mu1;
  s["a_mu2"] = st.a_mu2;
  s["a_alpha1"] = st.a_alpha1;
  s["a_alpha2"] = st.a_alpha2;
  j["state"] = std::move(s);
  return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text, const Hyperparams& hp, int n) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError("checkpoint", std::string("unparseable checkpoint: ") + e.what());
  }
  if (j.value("kind", "") != "sfcr-chain-checkpoint")
    throw InputError("checkpoint", "not a chain checkpoint file");
  if (j.value("version", -1) != 1)
    throw ConfigError("checkpoint", "unsupported checkpoint version " +
                                        std::to_string(j.value("version", -1)));
  const json& d = j.at("dims");
  auto expect = [&](const char* key, int want) {
    if (d.value(key, -1) != want)
      throw ConfigError("checkpoint", std::string("checkpoint dimension '") + key +
                                          "' does not match the current model");
  };
  expect("n", n);
  expect("gamma_basis", hp.gamma_basis);
  expect("exposure_basis", hp.exposure_basis);
  expect("resid_basis", hp.resid_basis);
  expect("num_factors", hp.num_factors);
  expect("num_resid_factors", hp.num_resid_factors);
  expect("max_lag", hp.max_lag);

  Checkpoint ck;
  ck.version = 1;
  ck.chain_index = j.at("chain").get<int>();
  ck.sweep = j.at("sweep").get<int>();
  ck.seed = j.at("seed").get<std::uint64_t>();
  ck.rng_state = j.at("rng").get<std::string>();
  const json& s = j.at("state");
  ModelState& st = ck.state;
  st.gamma = vec_from(s.at("gamma"));
  st.theta = mat_from(s.at("theta"));
  st.phi = mat_from(s.at("phi"));
  st.lag = s.at("lag").get<int>();
  st.mu = vec_from(s.at("mu"));
  st.alpha = mat_from(s.at("alpha"));
  st.psi = mat_from(s.at("psi"));
  st.sigma2_eps_x = s.at("sigma2_eps_x").get<double>();
  st.sigma2_eps_y = s.at("sigma2_eps_y").get<double>();
  st.sigma2_theta = vec_from(s.at("sigma2_theta"));
  st.lambda_gamma = s.at("lambda_gamma").get<double>();
  st.lambda_f = vec_from(s.at("lambda_f"));
  st.lambda_g = vec_from(s.at("lambda_g"));
  st.delta_mu = vec_from(s.at("delta_mu"));
  st.delta_alpha = vec_from(s.at("delta_alpha"));
  st.zeta = mat_from(s.at("zeta"));
  st.nu_alpha = s.at("nu_alpha").get<double>();
  st.a_mu1 = s.at("a_mu1").get<double>();
  st.a_mu2 = s.at("a_mu2").get<double>();
  st.a_alpha1 = s.at("a_alpha1").get<double>();
  st.a_alpha2 = s.at("a_alpha2").get<double>();
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck, const Hyperparams& hp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("checkpoint", "cannot open '" + path + "' for writing");
  out << checkpoint_to_json(ck, hp);
  if (!out.good()) throw InputError("checkpoint", "failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path, const Hyperparams& hp, int n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("checkpoint", "cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_from_json(text, hp, n);
}

// ---- Binary draw store --------------------------------------------------------
// Layout (host little-endian):
//   8-byte magic "SFCRDRW1", then int64 chain, D, M, n, num_lags, start_day,
//   then n site ids (int64 length + bytes each),
//   then int64 lag_trace[D],
//   then doubles: sigma2_y[D], sigma2_x[D], log_joint[D], gamma[D*M],
//   mu_curve[D*M], exposure per site [n][D*M], fitted_y per site [n][D*M].

namespace {

constexpr char kDrawsMagic[8] = {'S', 'F', 'C', 'R', 'D', 'R', 'W', '1'};

void put_i64(std::ofstream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_doubles(std::ofstream& out, const double* p, std::size_t count) {
  out.write(reinterpret_cast<const char*>(p), count * sizeof(double));
}

std::int64_t get_i64(std::ifstream& in, const std::string& path) {
  std::int64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw InputError("draws", "truncated draw store '" + path + "'");
  return v;
}

void get_doubles(std::ifstream& in, double* p, std::size_t count, const std::string& path) {
  if (!in.read(reinterpret_cast<char*>(p), count * sizeof(double)))
    throw InputError("draws", "truncated draw store '" + path + "'");
}

}  // namespace

void save_draws(const std::string& path, const ChainOutput& out, int start_day,
                const std::vector<std::string>& site_ids) {
  const std::int64_t D = out.retained();
  const std::int64_t M = out.gamma_draws.cols();
  const std::int64_t n = static_cast<std::int64_t>(out.exposure_draws.size());
  if (static_cast<std::int64_t>(site_ids.size()) != n)
    throw DimensionError("save_draws: one site id per exposure series required");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("draws", "cannot open '" + path + "' for writing");
  f.write(kDrawsMagic, sizeof(kDrawsMagic));
  put_i64(f, out.chain_index);
  put_i64(f, D);
  put_i64(f, M);
  put_i64(f, n);
  put_i64(f, out.lag_counts.size());
  put_i64(f, start_day);
  for (const auto& id : site_ids) {
    put_i64(f, static_cast<std::int64_t>(id.size()));
    f.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  for (int j = 0; j < D; ++j) put_i64(f, out.lag_trace[j]);
  put_doubles(f, out.sigma2_eps_y_trace.data(), D);
  put_doubles(f, out.sigma2_eps_x_trace.data(), D);
  put_doubles(f, out.log_joint_trace.data(), D);
  // Eigen matrices are column-major; stream them row-major so the file layout
  // is draw-by-draw.
  auto put_mat = [&](const Eigen::MatrixXd& m) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    put_doubles(f, rm.data(), static_cast<std::size_t>(m.rows()) * m.cols());
  };
  put_mat(out.gamma_draws);
  put_mat(out.mu_curve_draws);
  for (const auto& m : out.exposure_draws) put_mat(m);
  for (const auto& m : out.fitted_y_draws) put_mat(m);
  if (!f.good()) throw InputError("draws", "failed writing '" + path + "'");
}

DrawStore load_draws(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("draws", "cannot open '" + path + "'");
  char magic[8];
  if (!f.read(magic, sizeof(magic)) || std::memcmp(magic, kDrawsMagic, 7) != 0)
    throw InputError("draws", "'" + path + "' is not a draw store");
  if (magic[7] != kDrawsMagic[7])
    throw ConfigError("draws", "unsupported draw-store version in '" + path + "'");

  DrawStore store;
  ChainOutput& out = store.chain;
  out.chain_index = static_cast<int>(get_i64(f, path));
  const std::int64_t D = get_i64(f, path);
  const std::int64_t M = get_i64(f, path);
  const std::int64_t n = get_i64(f, path);
  const std::int64_t num_lags = get_i64(f, path);
  if (D < 0 || M < 0 || n < 0 || num_lags < 1)
    throw InputError("draws", "corrupt draw store '" + path + "'");
  store.start_day = static_cast<int>(get_i64(f, path));
  store.site_ids.resize(n);
  for (auto& id : store.site_ids) {
    const std::int64_t len = get_i64(f, path);
    if (len < 0 || len > (1 << 20))
      throw InputError("draws", "corrupt site id in '" + path + "'");
    id.resize(static_cast<std::size_t>(len));
    if (len > 0 && !f.read(id.data(), len))
      throw InputError("draws", "truncated draw store '" + path + "'");
  }

  out.lag_counts = Eigen::VectorXi::Zero(num_lags);
  out.lag_trace.resize(D);
  for (std::int64_t j = 0; j < D; ++j) {
    const std::int64_t lag = get_i64(f, path);
    if (lag < 0 || lag >= num_lags)
      throw InputError("draws", "lag outside histogram range in '" + path + "'");
    out.lag_trace[j] = static_cast<int>(lag);
    ++out.lag_counts[static_cast<int>(lag)];
  }
  out.sigma2_eps_y_trace.resize(D);
  out.sigma2_eps_x_trace.resize(D);
  out.log_joint_trace.resize(D);
  get_doubles(f, out.sigma2_eps_y_trace.data(), D, path);
  get_doubles(f, out.sigma2_eps_x_trace.data(), D, path);
  get_doubles(f, out.log_joint_trace.data(), D, path);
  auto get_mat = [&](Eigen::MatrixXd& m) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(D, M);
    get_doubles(f, rm.data(), static_cast<std::size_t>(D) * M, path);
    m = rm;
  };
  get_mat(out.gamma_draws);
  get_mat(out.mu_curve_draws);
  out.exposure_draws.resize(n);
  out.fitted_y_draws.resize(n);
  for (auto& m : out.exposure_draws) get_mat(m);
  for (auto& m : out.fitted_y_draws) get_mat(m);
  return store;
}

}  // namespace sfcr
