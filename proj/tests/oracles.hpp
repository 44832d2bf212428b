// Test-only reference implementations. Everything here materializes the
// dense Kronecker system and works in vec form, independent of the library's
// matrix-form code paths.
#pragma once

#include <Eigen/Dense>
#include <random>

#include "cstar/model.hpp"
#include "cstar/weights.hpp"

namespace oracle {

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

inline Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

// S = I - Psi^T (x) W, dense.
inline Eigen::MatrixXd filter_matrix(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& w) {
  const Eigen::Index np = psi.rows() * w.rows();
  return Eigen::MatrixXd::Identity(np, np) - kron(psi.transpose(), w);
}

// vec-form regression term: vec(sum_i X_i diag(beta_i)).
inline Eigen::VectorXd vec_regression(const Eigen::MatrixXd& b, const std::vector<Eigen::MatrixXd>& xt) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(xt.empty() ? 0 : xt.front().rows(),
                                            xt.empty() ? 0 : xt.front().cols());
  for (std::size_t i = 0; i < xt.size(); ++i) m += xt[i] * b.row(static_cast<Eigen::Index>(i)).asDiagonal();
  return vec(m);
}

// vec-form residuals: S vec(Y_t) - vec(reg) - (Pi^T (x) I) vec(Y_{t-1}).
inline std::vector<Eigen::VectorXd> vec_residuals(const cstar::ModelParams& params,
                                                  const cstar::PanelData& data, const Eigen::MatrixXd& wd) {
  const Eigen::Index n = data.n(), p = data.p();
  const Eigen::MatrixXd s = filter_matrix(params.Psi, wd);
  const Eigen::MatrixXd pi_kron = kron(params.Pi.transpose(), Eigen::MatrixXd::Identity(n, n));
  std::vector<Eigen::VectorXd> out;
  const Eigen::MatrixXd* prev = &data.Y0;
  for (std::size_t t = 0; t < data.Y.size(); ++t) {
    Eigen::VectorXd e = s * vec(data.Y[t]) - pi_kron * vec(*prev);
    if (params.q() > 0) e -= vec_regression(params.B, data.X[t]);
    out.push_back(std::move(e));
    prev = &data.Y[t];
  }
  return out;
}

// Gaussian conditional log-likelihood evaluated entirely in vec form with a
// dense LU log-determinant.
inline double dense_loglik(const cstar::ModelParams& params, const cstar::PanelData& data,
                           const Eigen::MatrixXd& wd) {
  const Eigen::Index np = data.n() * data.p();
  const double t_d = static_cast<double>(data.T());
  const Eigen::MatrixXd s = filter_matrix(params.Psi, wd);
  const double logdet = std::log(std::abs(s.partialPivLu().determinant()));
  double quad = 0.0;
  for (const auto& e : vec_residuals(params, data, wd)) quad += e.squaredNorm();
  return -0.5 * t_d * static_cast<double>(np) * std::log(2.0 * M_PI * params.sigma2) + t_d * logdet -
         quad / (2.0 * params.sigma2);
}

inline double dense_log_det(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& wd) {
  return std::log(std::abs(filter_matrix(psi, wd).partialPivLu().determinant()));
}

// random weight matrix: symmetric binary on a random graph, row-standardized
inline cstar::SpatialWeights random_weights(std::mt19937_64& gen, Eigen::Index n, double edge_prob = 0.4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (u(gen) < edge_prob) pairs.emplace_back(i, j);
  if (pairs.empty()) pairs.emplace_back(0, n - 1);
  return cstar::row_standardize(cstar::from_adjacency(n, pairs));
}

// random Psi scaled strictly inside the stability region of rho(W) <= 1
inline Eigen::MatrixXd random_stable_psi(std::mt19937_64& gen, Eigen::Index p, double target_radius = 0.6) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd psi(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) psi(i, j) = u(gen);
  const double rho = Eigen::EigenSolver<Eigen::MatrixXd>(psi, false).eigenvalues().cwiseAbs().maxCoeff();
  if (rho > 1e-12) psi *= target_radius / rho;
  return psi;
}

// Reference parameter set with the strong-spatial / weak-temporal shape and a
// jointly stationary transition (temporal radius ~0.83 on row-stochastic W).
inline cstar::ModelParams stable_demo_params() {
  cstar::ModelParams p;
  p.Psi.resize(2, 2);
  p.Psi << 0.7, 0.2, 0.1, 0.7;
  p.Pi.resize(2, 2);
  p.Pi << 0.05, 0.05, 0.10, 0.05;
  p.B.resize(3, 2);
  p.B << 1.0, 2.0, -2.0, 1.0, 3.0, -2.0;
  p.sigma2 = 1.0;
  return p;
}

}  // namespace oracle
