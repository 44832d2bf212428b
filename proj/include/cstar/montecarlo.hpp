#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cstar/estimate.hpp"
#include "cstar/simulate.hpp"

namespace cstar {

/// Replication study configuration. Defaults reproduce the reference design:
/// rook grids of side {4, 6, 8}, horizons {20, 80, 160}, 100 replications,
/// strong spatial and weak temporal dependence, intercept plus two standard
/// normal regressors, unit innovation variance.
struct McConfig {
  std::vector<Eigen::Index> grid_sides = {4, 6, 8};
  std::vector<Eigen::Index> horizons = {20, 80, 160};
  int replications = 100;
  ModelParams params = default_params();
  RegressorSpec regressors = {true, 2};
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = available parallelism
  Eigen::Index burn_in = 0;  // the fit conditions on Y_0, so no pre-sample is needed
  FitOptions fit_options = mc_fit_options();

  static ModelParams default_params();
  static FitOptions mc_fit_options();
  void validate() const;
};

McConfig quick_preset();  // sides {4,6}, horizons {20,80}, 20 replications
McConfig full_preset();   // the 9-cell design with 100 replications

struct McCell {
  Eigen::Index side = 0;
  Eigen::Index n = 0;
  Eigen::Index T = 0;
  int replications = 0;
  int failures = 0;  // non-converged fits, excluded from the statistics
  Eigen::VectorXd rmse;  // per scalar parameter, fit layout incl. sigma2 last
  Eigen::VectorXd bias;
  std::vector<Eigen::VectorXd> estimates;  // per successful replication
};

struct McResult {
  McConfig config;
  std::vector<McCell> cells;
  std::vector<std::string> names;  // per-parameter labels (sigma2 last)
  double wall_seconds = 0.0;
};

/// Simulate-fit cycles over the (side, T) grid. Replication r of cell c uses
/// the derived stream (seed, c, r), so results are independent of scheduling.
McResult run_study(const McConfig& cfg);

struct McSummaryRow {
  std::string param_group;  // beta / psi / pi / sigma2
  std::string param;        // coefficient name or "group_avg"
  Eigen::Index side = 0, n = 0, T = 0;
  double rmse = 0.0;
  double bias = 0.0;
  int n_fail = 0;
};

/// One row per parameter per cell plus the four group-average rows the
/// figures plot.
std::vector<McSummaryRow> summarize(const McResult& res);

}  // namespace cstar
