#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "sfcr/error.hpp"
#include "sfcr/gibbs.hpp"
#include "sfcr/mvn.hpp"
#include "sfcr/slice.hpp"

using namespace sfcr;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double chi2_pvalue(double stat, int df) {
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), stat));
}

// A deliberately correlated 3x3 SPD precision used across the Gaussian tests.
Eigen::MatrixXd toy_precision() {
  Eigen::MatrixXd Q(3, 3);
  Q << 4.0, 1.2, -0.6,  //
      1.2, 3.0, 0.8,    //
      -0.6, 0.8, 2.5;
  return Q;
}

}  // namespace

TEST_CASE("gaussian precision draw: moments match N(Q^-1 l, Q^-1) over 1e5 draws") {
  const Eigen::MatrixXd Q = toy_precision();
  Eigen::Vector3d l(1.0, -2.0, 0.5);
  const Eigen::MatrixXd S = Q.inverse();
  const Eigen::VectorXd m = S * l;

  Rng rng(20240601u);
  const int N = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(3, 3);
  for (int t = 0; t < N; ++t) {
    const Eigen::VectorXd x = sample_gaussian_precision(Q, l, rng);
    sum += x;
    outer += x * x.transpose();
  }
  const Eigen::VectorXd mean = sum / N;
  const Eigen::MatrixXd cov = outer / N - mean * mean.transpose();

  for (int j = 0; j < 3; ++j) {
    const double se = std::sqrt(S(j, j) / N);
    CHECK(std::abs(mean[j] - m[j]) < 5.0 * se);
  }
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const double var_hat = (S(a, a) * S(b, b) + S(a, b) * S(a, b)) / N;
      CHECK(std::abs(cov(a, b) - S(a, b)) < 5.0 * std::sqrt(var_hat));
    }
}

TEST_CASE("constrained gaussian draw: exact constraint and analytic conditional moments") {
  const Eigen::MatrixXd Q = toy_precision();
  Eigen::Vector3d l(1.0, -2.0, 0.5);
  Eigen::MatrixXd C(1, 3);
  C << 1.0, 1.0, 1.0;

  // Conditioning N(m, S) on C x = 0.
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
  CHECK(worst_violation < 1e-10);

  const Eigen::VectorXd mean = sum / N;
  const Eigen::MatrixXd cov = outer / N - mean * mean.transpose();
  for (int j = 0; j < 3; ++j) {
    const double se = std::sqrt(std::max(S_c(j, j), 1e-12) / N);
    CHECK(std::abs(mean[j] - m_c[j]) < 5.0 * se);
  }
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const double var_hat =
          (S_c(a, a) * S_c(b, b) + S_c(a, b) * S_c(a, b)) / N + 1e-16;
      CHECK(std::abs(cov(a, b) - S_c(a, b)) < 5.0 * std::sqrt(var_hat));
    }
}

TEST_CASE("constrained gaussian draw: dependent constraint rows are an error") {
  const Eigen::MatrixXd Q = toy_precision();
  Eigen::Vector3d l(0.0, 0.0, 0.0);
  Eigen::MatrixXd C(2, 3);
  C << 1.0, 1.0, 1.0,  //
      2.0, 2.0, 2.0;
  Rng rng(5u);
  CHECK_THROWS_AS(sample_gaussian_constrained(Q, l, C, rng), SamplerError);
}

TEST_CASE("truncated gamma: support, untruncated moments, and truncated mean") {
  Rng rng(424242u);
  const int N = 100000;

  SUBCASE("lower bound honored and untruncated case matches shape/rate mean") {
    double sum = 0.0;
    for (int t = 0; t < N; ++t) sum += truncated_gamma(3.0, 2.0, 0.0, rng);
    // mean 1.5, sd of the mean = sqrt(3)/2/sqrt(N)
    CHECK(std::abs(sum / N - 1.5) < 5.0 * std::sqrt(0.75 / N));
  }

  SUBCASE("moderate truncation: empirical mean matches numeric integral") {
    const double shape = 2.5, rate = 1.5, lower = 2.0;
    // Truncated mean by Simpson integration of x^shape e^{-rate x} on
    // [lower, lower + 40/rate] against the same integrand without the x.
    const double hi = lower + 40.0 / rate;
    const int steps = 20000;
    const double h = (hi - lower) / steps;
    double num = 0.0, den = 0.0;
    for (int j = 0; j <= steps; ++j) {
      const double x = lower + j * h;
      const double w = (j == 0 || j == steps) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
      const double f = std::pow(x, shape - 1.0) * std::exp(-rate * x);
      num += w * x * f;
      den += w * f;
    }
    const double target = num / den;

    double sum = 0.0, sumsq = 0.0;
    double lowest = kInf;
    for (int t = 0; t < N; ++t) {
      const double x = truncated_gamma(shape, rate, lower, rng);
      lowest = std::min(lowest, x);
      sum += x;
      sumsq += x * x;
    }
    CHECK(lowest >= lower);
    const double mean = sum / N;
    const double var = sumsq / N - mean * mean;
    CHECK(std::abs(mean - target) < 5.0 * std::sqrt(var / N));
  }

  SUBCASE("bound far beyond all mass returns the bound") {
    const double x = truncated_gamma(2.0, 1.0, 400.0, rng);
    CHECK(x == 400.0);
  }

  SUBCASE("nonpositive shape or rate is an error") {
    CHECK_THROWS_AS(truncated_gamma(0.0, 1.0, 0.0, rng), SamplerError);
    CHECK_THROWS_AS(truncated_gamma(1.0, -1.0, 0.0, rng), SamplerError);
  }
}

TEST_CASE("gumbel-max: uniform weights give uniform frequencies (chi-square)") {
  const int cells = 22;
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(cells);
  Rng rng(777u);
  const int N = 100000;
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(cells);
  for (int t = 0; t < N; ++t) counts[gumbel_max_draw(w, rng)] += 1;

  const double expected = static_cast<double>(N) / cells;
  double stat = 0.0;
  for (int c = 0; c < cells; ++c) {
    const double d = counts[c] - expected;
    stat += d * d / expected;
  }
  CHECK(chi2_pvalue(stat, cells - 1) > 0.001);
}

TEST_CASE("gumbel-max: +50 log-weight dominance") {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(22);
  w[13] = 50.0;
  Rng rng(99u);
  const int N = 100000;
  int hits = 0;
  for (int t = 0; t < N; ++t)
    if (gumbel_max_draw(w, rng) == 13) ++hits;
  CHECK(static_cast<double>(hits) / N > 0.999);
}

TEST_CASE("gumbel-max vs direct softmax categorical: two-sample chi-square") {
  Eigen::VectorXd w(6);
  w << 0.0, 1.0, -0.5, 2.0, 0.3, -1.0;
  const int N = 100000;

  Rng rng_a(1001u);
  Eigen::VectorXi a = Eigen::VectorXi::Zero(w.size());
  for (int t = 0; t < N; ++t) a[gumbel_max_draw(w, rng_a)] += 1;

  // Direct draw: normalize, then invert the CDF on a uniform.
  Eigen::VectorXd p = (w.array() - w.maxCoeff()).exp();
  p /= p.sum();
  Rng rng_b(2002u);
  Eigen::VectorXi b = Eigen::VectorXi::Zero(w.size());
  for (int t = 0; t < N; ++t) {
    double u = rng_b.uniform();
    int s = 0;
    while (s < w.size() - 1 && u > p[s]) {
      u -= p[s];
      ++s;
    }
    b[s] += 1;
  }

  double stat = 0.0;
  for (int c = 0; c < w.size(); ++c) {
    const double d = static_cast<double>(a[c] - b[c]);
    const double tot = static_cast<double>(a[c] + b[c]);
    if (tot > 0) stat += d * d / tot;
  }
  CHECK(chi2_pvalue(stat, static_cast<int>(w.size()) - 1) > 0.001);
}

TEST_CASE("slice sampler: standard normal moments over 1e5 transitions") {
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
  CHECK(std::abs(mean) < 0.02);
  CHECK(var > 0.95);
  CHECK(var < 1.05);
}

TEST_CASE("slice sampler: bounds contract on [2, 128]") {
  SliceOptions opt;
  opt.lower = 2.0;
  opt.upper = 128.0;
  opt.width = 10.0;
  auto logdensity = [](double x) { return -0.01 * x; };  // gentle slope, wide support
  Rng rng(55u);
  double x = 64.0;
  for (int t = 0; t < 2000; ++t) {
    x = slice_sample(logdensity, x, opt, rng);
    CHECK(x >= 2.0);
    CHECK(x <= 128.0);
  }
}

TEST_CASE("slice sampler: Gamma(2,1) mean within 2.0 +/- 0.03") {
  SliceOptions opt;
  opt.lower = 0.0;
  auto logdensity = [](double x) { return x <= 0.0 ? -kInf : std::log(x) - x; };
  Rng rng(271828u);
  const int N = 100000;
  double x = 2.0, sum = 0.0;
  for (int t = 0; t < N; ++t) {
    x = slice_sample(logdensity, x, opt, rng);
    sum += x;
  }
  CHECK(std::abs(sum / N - 2.0) < 0.03);
}

TEST_CASE("slice sampler: non-finite logdensity at the current point is an error") {
  SliceOptions opt;
  Rng rng(1u);
  auto bad = [](double) { return -kInf; };
  CHECK_THROWS_AS(slice_sample(bad, 0.0, opt, rng), SamplerError);
  SliceOptions bounded;
  bounded.lower = 2.0;
  bounded.upper = 128.0;
  auto fine = [](double) { return 0.0; };
  CHECK_THROWS_AS(slice_sample(fine, 1.0, bounded, rng), SamplerError);
}
