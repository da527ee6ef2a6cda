#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sfcr/inference.hpp"

namespace sfcr {
namespace {

// Gathers one grid point's values across all chains, sorted.  Sorting first
// makes every downstream reduction (mean included) independent of chain order.
struct PointPool {
  std::vector<double> values;

  void fill(const std::vector<ChainOutput>& outputs,
            const Eigen::MatrixXd ChainOutput::* member, int col) {
    values.clear();
    for (const auto& out : outputs) {
      const Eigen::MatrixXd& m = out.*member;
      for (int d = 0; d < m.rows(); ++d) values.push_back(m(d, col));
    }
    std::sort(values.begin(), values.end());
  }

  void fill_site(const std::vector<ChainOutput>& outputs,
                 const std::vector<Eigen::MatrixXd> ChainOutput::* member, int site,
                 int col) {
    values.clear();
    for (const auto& out : outputs) {
      const Eigen::MatrixXd& m = (out.*member)[site];
      for (int d = 0; d < m.rows(); ++d) values.push_back(m(d, col));
    }
    std::sort(values.begin(), values.end());
  }

  double mean() const {
    return std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  }

  // Type-7 (linear interpolation) quantile of the sorted values.
  double quantile(double p) const {
    const int n = static_cast<int>(values.size());
    if (n == 1) return values[0];
    const double h = p * (n - 1);
    const int lo = static_cast<int>(std::floor(h));
    if (lo + 1 >= n) return values[n - 1];
    const double w = h - lo;
    return values[lo] + w * (values[lo + 1] - values[lo]);
  }
};

int total_retained(const std::vector<ChainOutput>& outputs) {
  int total = 0;
  for (const auto& out : outputs) total += out.retained();
  return total;
}

CurveSummary summarize_member(const std::vector<ChainOutput>& outputs,
                              const Eigen::MatrixXd ChainOutput::* member, int cols) {
  CurveSummary s;
  s.mean.resize(cols);
  s.q025.resize(cols);
  s.q500.resize(cols);
  s.q975.resize(cols);
  PointPool pool;
  for (int t = 0; t < cols; ++t) {
    pool.fill(outputs, member, t);
    s.mean[t] = pool.mean();
    s.q025[t] = pool.quantile(0.025);
    s.q500[t] = pool.quantile(0.5);
    s.q975[t] = pool.quantile(0.975);
  }
  return s;
}

CurveSummary summarize_site(const std::vector<ChainOutput>& outputs,
                            const std::vector<Eigen::MatrixXd> ChainOutput::* member,
                            int site, int cols) {
  CurveSummary s;
  s.mean.resize(cols);
  s.q025.resize(cols);
  s.q500.resize(cols);
  s.q975.resize(cols);
  PointPool pool;
  for (int t = 0; t < cols; ++t) {
    pool.fill_site(outputs, member, site, t);
    s.mean[t] = pool.mean();
    s.q025[t] = pool.quantile(0.025);
    s.q500[t] = pool.quantile(0.5);
    s.q975[t] = pool.quantile(0.975);
  }
  return s;
}

void append_summary_rows(std::ostringstream& out, const char* curve,
                         const std::string& site_id, const CurveSummary& s,
                         const Grid& grid) {
  for (int t = 0; t < s.mean.size(); ++t)
    out << curve << ',' << site_id << ',' << grid.start_day + t << ','
        << csv_double(s.mean[t]) << ',' << csv_double(s.q025[t]) << ','
        << csv_double(s.q500[t]) << ',' << csv_double(s.q975[t]) << '\n';
}

}  // namespace

std::string csv_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

EssResult ess(const Eigen::VectorXd& trace) {
  const int n = static_cast<int>(trace.size());
  if (n < 10) throw InputError("trace", "effective sample size needs at least 10 draws");
  const Eigen::VectorXd c = trace.array() - trace.mean();
  const double g0 = c.squaredNorm() / n;
  if (!(g0 > 0.0)) return {static_cast<double>(n), true};

  auto autocov = [&](int k) {
    double s = 0.0;
    for (int t = 0; t + k < n; ++t) s += c[t] * c[t + k];
    return s / n;
  };

  // Initial monotone positive sequence over pairs of autocovariances: sum
  // pairs while positive, clamping each to the previous pair's value.
  double sum = -g0;
  double prev = std::numeric_limits<double>::infinity();
  for (int j = 0; 2 * j + 1 < n; ++j) {
    double pair = autocov(2 * j) + autocov(2 * j + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, prev);
    sum += 2.0 * pair;
    prev = pair;
  }
  if (!(sum > 0.0)) sum = g0;  // pathological anticorrelation: report n
  return {n * g0 / sum, false};
}

LagHpd hpd_discrete(const Eigen::VectorXd& histogram, double level) {
  const int m = static_cast<int>(histogram.size());
  if (m == 0) throw InputError("histogram", "empty lag histogram");
  if (!(level > 0.0) || !(level < 1.0))
    throw InputError("level", "HPD level must lie strictly between 0 and 1");
  if (histogram.minCoeff() < 0.0 || !(histogram.sum() > 0.0))
    throw InputError("histogram", "lag histogram needs nonnegative mass summing above 0");
  const Eigen::VectorXd probs = histogram / histogram.sum();

  std::vector<bool> in(m, false);
  LagHpd result;
  while (result.mass + 1e-12 < level) {
    // Highest remaining probability; ties prefer lags adjacent to the set,
    // then the smaller lag.  The greedy order is level-independent, which
    // makes the sets nested across levels.
    int best = -1;
    for (int s = 0; s < m; ++s) {
      if (in[s]) continue;
      if (best < 0 || probs[s] > probs[best]) {
        best = s;
        continue;
      }
      if (probs[s] == probs[best]) {
        const bool s_adj = (s > 0 && in[s - 1]) || (s + 1 < m && in[s + 1]);
        const bool b_adj = (best > 0 && in[best - 1]) || (best + 1 < m && in[best + 1]);
        if (s_adj && !b_adj) best = s;  // s < best already, so "lower lag" never flips
      }
    }
    if (best < 0) break;  // every lag already in the set
    in[best] = true;
    result.mass += probs[best];
    result.lags.push_back(best);
  }
  std::sort(result.lags.begin(), result.lags.end());
  result.contiguous =
      result.lags.back() - result.lags.front() + 1 == static_cast<int>(result.lags.size());
  return result;
}

CurveSummaries summarize_curves(const std::vector<ChainOutput>& outputs, const Grid& grid) {
  if (total_retained(outputs) == 0)
    throw InputError("draws", "summaries need at least one retained draw");
  const int M = grid.size();
  const int n = static_cast<int>(outputs.front().exposure_draws.size());
  CurveSummaries s;
  s.gamma = summarize_member(outputs, &ChainOutput::gamma_draws, M);
  s.mu = summarize_member(outputs, &ChainOutput::mu_curve_draws, M);
  s.exposure.reserve(n);
  s.fitted_y.reserve(n);
  for (int i = 0; i < n; ++i) {
    s.exposure.push_back(summarize_site(outputs, &ChainOutput::exposure_draws, i, M));
    s.fitted_y.push_back(summarize_site(outputs, &ChainOutput::fitted_y_draws, i, M));
  }
  return s;
}

MuGammaHist mu_gamma_density(const std::vector<ChainOutput>& outputs, const Grid& grid,
                             int bins) {
  if (bins < 1) throw InputError("bins", "histogram needs at least one bin");
  if (total_retained(outputs) == 0)
    throw InputError("draws", "histogram needs at least one retained draw");
  const int M = grid.size();

  Eigen::VectorXd mu_mean(M), gamma_mean(M);
  PointPool pool;
  for (int t = 0; t < M; ++t) {
    pool.fill(outputs, &ChainOutput::mu_curve_draws, t);
    mu_mean[t] = pool.mean();
    pool.fill(outputs, &ChainOutput::gamma_draws, t);
    gamma_mean[t] = pool.mean();
  }

  MuGammaHist h;
  h.counts = Eigen::MatrixXi::Zero(bins, bins);
  h.mu_lo = mu_mean.minCoeff();
  h.mu_hi = mu_mean.maxCoeff();
  h.gamma_lo = gamma_mean.minCoeff();
  h.gamma_hi = gamma_mean.maxCoeff();
  auto bin_of = [bins](double v, double lo, double hi) {
    if (!(hi > lo)) return 0;  // constant curve: everything in the first bin
    const int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    return std::clamp(b, 0, bins - 1);
  };
  for (int t = 0; t < M; ++t)
    ++h.counts(bin_of(mu_mean[t], h.mu_lo, h.mu_hi),
               bin_of(gamma_mean[t], h.gamma_lo, h.gamma_hi));
  return h;
}

Eigen::VectorXd pooled_lag_probabilities(const std::vector<ChainOutput>& outputs) {
  if (outputs.empty()) throw InputError("draws", "no chains to pool");
  Eigen::VectorXd total = Eigen::VectorXd::Zero(outputs.front().lag_counts.size());
  for (const auto& out : outputs) {
    if (out.lag_counts.size() != total.size())
      throw DimensionError("pooled chains disagree on the lag range");
    total += out.lag_counts.cast<double>();
  }
  if (!(total.sum() > 0.0)) throw InputError("draws", "no retained draws to pool");
  return total / total.sum();
}

std::string curve_summaries_csv(const CurveSummaries& s, const Grid& grid,
                                const std::vector<std::string>& site_ids) {
  if (site_ids.size() != s.exposure.size() || site_ids.size() != s.fitted_y.size())
    throw DimensionError("curve summaries and site ids disagree");
  std::ostringstream out;
  out << "curve,site_id,time,mean,q2.5,q50,q97.5\n";
  append_summary_rows(out, "gamma", "", s.gamma, grid);
  append_summary_rows(out, "mu", "", s.mu, grid);
  for (std::size_t i = 0; i < site_ids.size(); ++i)
    append_summary_rows(out, "exposure", site_ids[i], s.exposure[i], grid);
  for (std::size_t i = 0; i < site_ids.size(); ++i)
    append_summary_rows(out, "fitted_y", site_ids[i], s.fitted_y[i], grid);
  return out.str();
}

std::string lag_posterior_csv(const Eigen::VectorXd& probabilities) {
  std::ostringstream out;
  out << "lag,probability\n";
  for (int s = 0; s < probabilities.size(); ++s)
    out << s << ',' << csv_double(probabilities[s]) << '\n';
  return out.str();
}

std::string lag_hpd_csv(const Eigen::VectorXd& probabilities) {
  static constexpr double kLevels[] = {0.50, 0.80, 0.95, 0.99};
  std::ostringstream out;
  out << "level,mass,contiguous,lags\n";
  for (const double level : kLevels) {
    const LagHpd h = hpd_discrete(probabilities, level);
    out << csv_double(level) << ',' << csv_double(h.mass) << ',' << (h.contiguous ? 1 : 0)
        << ',';
    for (std::size_t i = 0; i < h.lags.size(); ++i) out << (i ? ";" : "") << h.lags[i];
    out << '\n';
  }
  return out.str();
}

std::string mu_gamma_csv(const MuGammaHist& h, int bins) {
  std::ostringstream out;
  out << "mu_center,gamma_center,count\n";
  const double dw = (h.mu_hi - h.mu_lo) / bins;
  const double gw = (h.gamma_hi - h.gamma_lo) / bins;
  for (int a = 0; a < bins; ++a)
    for (int b = 0; b < bins; ++b)
      out << csv_double(h.mu_lo + (a + 0.5) * dw) << ','
          << csv_double(h.gamma_lo + (b + 0.5) * gw) << ',' << h.counts(a, b) << '\n';
  return out.str();
}

std::string ess_table_csv(const std::vector<ChainOutput>& outputs) {
  std::ostringstream out;
  out << "chain,series,ess,degenerate\n";
  const std::pair<const char*, Eigen::VectorXd ChainOutput::*> series[] = {
      {"sigma2_eps_y", &ChainOutput::sigma2_eps_y_trace},
      {"sigma2_eps_x", &ChainOutput::sigma2_eps_x_trace},
      {"log_joint", &ChainOutput::log_joint_trace},
  };
  for (const auto& [name, member] : series) {
    double pooled = 0.0;
    bool any = false;
    for (const auto& chain : outputs) {
      const Eigen::VectorXd& trace = chain.*member;
      if (trace.size() < 10) continue;
      const EssResult r = ess(trace);
      out << chain.chain_index << ',' << name << ',' << csv_double(r.ess) << ','
          << (r.degenerate ? 1 : 0) << '\n';
      pooled += r.ess;
      any = true;
    }
    if (any) out << "pooled," << name << ',' << csv_double(pooled) << ",0\n";
  }
  return out.str();
}

}  // namespace sfcr
