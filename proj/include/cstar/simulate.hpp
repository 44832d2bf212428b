#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cstar/model.hpp"
#include "cstar/rng.hpp"
#include "cstar/simplex.hpp"

namespace cstar {

enum class NoiseKind { gaussian, student_t };

struct RegressorSpec {
  bool intercept = false;  // leading all-ones regressor with its own slopes
  Eigen::Index n_random = 0;  // standard normal regressors after the intercept

  Eigen::Index count() const { return (intercept ? 1 : 0) + n_random; }
};

enum class Y0Spec { zeros, stationary_draw };

struct SimConfig {
  ModelParams params;
  Eigen::Index T = 1;
  Eigen::Index burn_in = 100;
  std::uint64_t seed = 0;
  RegressorSpec regressors;
  Y0Spec y0 = Y0Spec::zeros;
  NoiseKind noise = NoiseKind::gaussian;
  double student_t_df = 5.0;  // only used for student_t noise
  double stability_margin = 1e-6;
};

/// Forward recursion of the model: per period draw E_t, form
/// R_t = sum_i X_{t,i} diag(beta_i) + Y_{t-1} Pi + E_t and solve the spatial
/// filter for Y_t; burn-in periods are discarded. Deterministic given the
/// seed. The innovations actually used for the kept periods are returned so
/// tests can invert the recursion.
struct SimOutput {
  PanelData panel;
  std::vector<Eigen::MatrixXd> innovations;  // E_1..E_T
};

SimOutput simulate(const SimConfig& cfg, const SpatialWeights& w);
SimOutput simulate(const SimConfig& cfg, std::shared_ptr<const WeightsSpectrum> ws);

/// Back-transform each panel row through ilr_inv; returns per-time n x D
/// share matrices (rows are compositions summing to 1).
std::vector<Eigen::MatrixXd> simulate_compositions(const SimConfig& cfg, const SpatialWeights& w,
                                                   const IlrBasis& basis);

}  // namespace cstar
