#pragma once

#include <memory>
#include <vector>

#include "cstar/model.hpp"

namespace cstar {

enum class Optimizer { quasi_newton_numeric_gradient, nelder_mead };

struct FitOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-5;  // on the per-observation average log-likelihood
  double stability_margin = 1e-4;
  double hessian_step = 1e-4;  // relative central-difference step
  Optimizer optimizer = Optimizer::quasi_newton_numeric_gradient;
  bool concentrate = true;
  bool fix_psi_zero = false;  // restrict Psi = 0
  bool fix_pi_zero = false;   // restrict Pi = 0 (drops the lag block)
  bool compute_std_errors = true;

  void validate() const;
};

/// Estimates and inference aligned to (vec B, vec Psi, vec Pi, sigma_eps),
/// column-major vec. Fixed (restricted) coordinates carry NaN standard
/// errors and zero vcov rows.
struct FitResult {
  ModelParams params;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXd estimates;   // full layout, sigma_eps last
  Eigen::VectorXd std_errors;  // NaN where fixed or non-concave
  Eigen::VectorXd t_stats;
  Eigen::MatrixXd vcov;
  bool hessian_pseudo_inverse = false;
  std::vector<Eigen::Index> non_concave;  // indices with negative vcov diagonal

  Eigen::Index p() const { return params.p(); }
  Eigen::Index q() const { return params.q(); }
};

/// Names aligned to the estimate layout: beta_{i,j} (i = regressor,
/// j = component, 1-based; i = 0 is the intercept when present), psi_{j,k},
/// pi_{j,k}, sigma_eps.
std::vector<std::string> parameter_names(Eigen::Index q, Eigen::Index p, bool first_regressor_is_intercept);

// Flat indices into the (vec B, vec Psi, vec Pi, sigma_eps) layout.
inline Eigen::Index beta_index(Eigen::Index q, Eigen::Index /*p*/, Eigen::Index i, Eigen::Index j) {
  return j * q + i;
}
inline Eigen::Index psi_index(Eigen::Index q, Eigen::Index p, Eigen::Index j, Eigen::Index k) {
  return q * p + k * p + j;
}
inline Eigen::Index pi_index(Eigen::Index q, Eigen::Index p, Eigen::Index j, Eigen::Index k) {
  return q * p + p * p + k * p + j;
}
inline Eigen::Index sigma_index(Eigen::Index q, Eigen::Index p) { return q * p + 2 * p * p; }

/// Gaussian conditional log-likelihood given Y_0:
///   -(Tnp/2) log(2 pi sigma2) + T log|S| - RSS / (2 sigma2).
double loglik(const ModelParams& params, const PanelData& data, const SpatialWeights& w);
double loglik(const ModelParams& params, const PanelData& data, std::shared_ptr<const WeightsSpectrum> ws);

/// The log-likelihood exactly as printed in the source material, exposed for
/// diagnostics only (experimental): the (D-1) scalings and the sign of the
/// log sigma^2 term make it unusable as an objective.
double loglik_paper_form(const ModelParams& params, const PanelData& data, const SpatialWeights& w);

struct ProfiledFit {
  double loglik = 0.0;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Pi;
  double sigma2 = 0.0;
};

/// Profile likelihood: given Psi, (B, Pi) solve a columnwise least-squares
/// problem on the filtered response and sigma2 = RSS/(Tnp).
ProfiledFit concentrated_loglik(const Eigen::MatrixXd& psi, const PanelData& data, const SpatialWeights& w,
                                bool fix_pi_zero = false, double stability_margin = 1e-4);

/// Quasi-maximum-likelihood fit. Starts at Psi = 0, keeps every iterate
/// inside the stability region, and reports Hessian-based standard errors.
FitResult fit(const PanelData& data, const SpatialWeights& w, const FitOptions& opts = {});

}  // namespace cstar
