#include "sfcr/state.hpp"

namespace sfcr {

ModelState make_state(const Hyperparams& hp, int n) {
  const int K = hp.num_factors, L = hp.num_resid_factors;
  ModelState s;
  s.gamma = Eigen::VectorXd::Zero(hp.gamma_basis);
  s.theta = Eigen::MatrixXd::Zero(L, n);
  s.phi = Eigen::MatrixXd::Zero(hp.resid_basis, L);
  s.mu = Eigen::VectorXd::Zero(K);
  s.alpha = Eigen::MatrixXd::Zero(K, n);
  s.psi = Eigen::MatrixXd::Zero(hp.exposure_basis, K);
  s.sigma2_theta = Eigen::VectorXd::Ones(L);
  s.lambda_f = Eigen::VectorXd::Ones(K);
  s.lambda_g = Eigen::VectorXd::Ones(L);
  s.delta_mu = Eigen::VectorXd::Ones(K);
  s.delta_alpha = Eigen::VectorXd::Ones(K);
  s.zeta = Eigen::MatrixXd::Ones(K, n);
  return s;
}

void ModelState::validate(const Hyperparams& hp, int n) const {
  const int K = hp.num_factors, L = hp.num_resid_factors;
  auto need = [](bool ok, const char* what) {
    if (!ok) throw DimensionError(std::string("state: bad shape for ") + what);
  };
  need(gamma.size() == hp.gamma_basis, "gamma");
  need(theta.rows() == L && theta.cols() == n, "theta");
  need(phi.rows() == hp.resid_basis && phi.cols() == L, "phi");
  need(mu.size() == K, "mu");
  need(alpha.rows() == K && alpha.cols() == n, "alpha");
  need(psi.rows() == hp.exposure_basis && psi.cols() == K, "psi");
  need(sigma2_theta.size() == L, "sigma2_theta");
  need(lambda_f.size() == K, "lambda_f");
  need(lambda_g.size() == L, "lambda_g");
  need(delta_mu.size() == K && delta_alpha.size() == K, "delta");
  need(zeta.rows() == K && zeta.cols() == n, "zeta");
  if (lag < 0 || lag > hp.max_lag) throw DimensionError("state: lag out of range");
}

}  // namespace sfcr
