#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "cstar/common.hpp"
#include "cstar/weights.hpp"

namespace cstar {

/// Parameters of the spatiotemporal multivariate autoregressive model
///   Y_t = sum_i X_{t,i} diag(beta_i) + W Y_t Psi + Y_{t-1} Pi + E_t
/// with p response components, q regressors (row i of B = beta_i^T) and
/// i.i.d. N(0, sigma2) innovations.
struct ModelParams {
  Eigen::MatrixXd B;    // q x p
  Eigen::MatrixXd Psi;  // p x p spatial autoregression
  Eigen::MatrixXd Pi;   // p x p temporal autoregression
  double sigma2 = 1.0;

  Eigen::Index p() const { return Psi.rows(); }
  Eigen::Index q() const { return B.rows(); }

  /// Shape and finiteness checks; sigma2 may be zero only for noiseless
  /// diagnostics, estimation requires sigma2 > 0.
  void validate() const;
};

/// Panel of transformed responses: Y_1..Y_T (n x p each), the initial
/// condition Y_0 the likelihood conditions on, and per-time regressors.
struct PanelData {
  Eigen::MatrixXd Y0;                           // n x p
  std::vector<Eigen::MatrixXd> Y;               // T matrices, n x p
  std::vector<std::vector<Eigen::MatrixXd>> X;  // X[t][i], n x p, t = 0..T-1 for times 1..T

  Eigen::Index n() const { return Y0.rows(); }
  Eigen::Index p() const { return Y0.cols(); }
  Eigen::Index T() const { return static_cast<Eigen::Index>(Y.size()); }
  Eigen::Index q() const { return X.empty() ? 0 : static_cast<Eigen::Index>(X.front().size()); }

  void validate() const;
};

/// One-time spectral analysis of a weight matrix, shared by every filter
/// built on the same W. The eigenbasis is only trusted when the
/// reconstruction error is small; otherwise solves fall back to sparse LU.
class WeightsSpectrum {
 public:
  explicit WeightsSpectrum(const SpatialWeights& w);

  const SpatialWeights& weights() const { return w_; }
  Eigen::Index size() const { return w_.size(); }
  bool has_eigenvalues() const { return has_values_; }
  bool has_eigenbasis() const { return has_basis_; }
  const Eigen::VectorXcd& eigenvalues() const { return values_; }
  const Eigen::MatrixXcd& basis() const { return basis_; }
  const Eigen::MatrixXcd& basis_inverse() const { return basis_inv_; }
  double spectral_radius() const;

 private:
  SpatialWeights w_;
  Eigen::VectorXcd values_;
  Eigen::MatrixXcd basis_, basis_inv_;
  bool has_values_ = false;
  bool has_basis_ = false;
};

struct StabilityReport {
  bool stable = false;
  double spectral_product = 0.0;   // rho(Psi) * rho(W) = max |mu_i nu_j|
  double psi_norm_1 = 0.0;         // max absolute column sum of Psi
  double w_norm_inf = 0.0;         // max absolute row sum of W
  bool sufficient_bound_ok = false;  // psi_norm_1 * w_norm_inf < 1
  double margin = 0.0;
};

/// True iff max_{i,j} |mu_i(Psi) nu_j(W)| < 1 - margin, with the cheap
/// column-sum bound reported alongside.
StabilityReport stability_check(const Eigen::MatrixXd& psi, const SpatialWeights& w, double margin = 1e-6);
StabilityReport stability_check(const Eigen::MatrixXd& psi, const WeightsSpectrum& ws, double margin = 1e-6);

/// Spectral radius of the lag-1 transition S^{-1} (Pi^T kron I_n); the joint
/// process is nonstationary when this is >= 1 even if the spatial filter is
/// invertible.
double temporal_spectral_radius(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& pi, const WeightsSpectrum& ws);

/// The spatial filter S = I_{np} - Psi^T kron W, applied and solved in
/// matrix form without materializing the Kronecker product.
class SpatialFilter {
 public:
  SpatialFilter(const Eigen::MatrixXd& psi, std::shared_ptr<const WeightsSpectrum> ws, double margin = 1e-6);

  const Eigen::MatrixXd& psi() const { return psi_; }
  const WeightsSpectrum& spectrum() const { return *ws_; }
  const Eigen::VectorXcd& psi_eigenvalues() const { return mu_; }

  /// Y - W Y Psi; equals unvec(S vec(Y)).
  Eigen::MatrixXd apply(const Eigen::MatrixXd& y) const;

  /// Solve S vec(Y) = vec(R) for Y. Throws NumericError when the stability
  /// check failed at construction.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& r) const;

  /// log |S| = sum_{i,j} log |1 - mu_i nu_j| via the eigenvalue product when
  /// W admits eigenvalues, dense LU otherwise.
  double log_det() const;

  bool stable() const { return stability_.stable; }
  const StabilityReport& stability() const { return stability_; }

 private:
  void require_stable() const;

  Eigen::MatrixXd psi_;
  std::shared_ptr<const WeightsSpectrum> ws_;
  StabilityReport stability_;
  Eigen::VectorXcd mu_;        // eigenvalues of Psi
  Eigen::MatrixXcd schur_t_;   // complex Schur of Psi^T: Psi^T = U T U^*
  Eigen::MatrixXcd schur_u_;
};

/// E_t = Y_t - sum_i X_{t,i} diag(beta_i) - W Y_t Psi - Y_{t-1} Pi
/// for t = 1..T.
std::vector<Eigen::MatrixXd> residuals(const ModelParams& params, const PanelData& data, const SpatialWeights& w);

/// Column j of the regression term: sum_i beta_{i,j} * X_{t,i} column j.
Eigen::MatrixXd regression_term(const Eigen::MatrixXd& b, const std::vector<Eigen::MatrixXd>& xt);

}  // namespace cstar
