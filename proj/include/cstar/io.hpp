#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cstar/estimate.hpp"
#include "cstar/montecarlo.hpp"
#include "cstar/simplex.hpp"
#include "cstar/weights.hpp"

namespace cstar {

// Full round-trip decimal formatting (shortest representation that parses
// back to the same double).
std::string format_double(double v);
double parse_double(const std::string& s);

enum class ZeroPolicy { reject, replace };

struct PanelLoadOptions {
  BasisMode basis = BasisMode::helmert;
  std::optional<Eigen::MatrixXi> partition;  // balance mode only
  ZeroPolicy zero_policy = ZeroPolicy::reject;
  double zero_delta = 1e-6;
};

/// A loaded compositional panel: ilr-transformed responses plus the id maps
/// needed to write results back in terms of the original labels.
struct LoadedPanel {
  PanelData data;              // Y0 = earliest time point, Y_1.. the rest
  IlrBasis basis;
  std::vector<std::string> regions;  // unit order (lexicographic region_id)
  std::vector<std::string> parts;    // part label order (lexicographic)
  std::vector<long long> times;      // canonical time keys, equidistant
  std::vector<std::string> time_labels;  // original spellings, sorted
  int zeros_replaced = 0;
};

/// Long CSV `region_id,time,part,value`; every (region, time) must carry all
/// parts, times must be equidistant after sorting. Values are closed to
/// shares row by row.
LoadedPanel load_panel(const std::string& path, const PanelLoadOptions& opts = {});

/// Write share panels in the same long schema. panels[t] is n x D.
void save_panel(const std::string& path, const std::vector<std::string>& regions,
                const std::vector<std::string>& time_labels, const std::vector<std::string>& parts,
                const std::vector<Eigen::MatrixXd>& panels);

/// Long CSV `region_id,time,regressor,component,value`; component is 1..p or
/// `*` to broadcast a scalar across components. Returns X[t][i] aligned to
/// the panel's region order and response times (all times after the first).
std::vector<std::vector<Eigen::MatrixXd>> load_regressors(const std::string& path, const LoadedPanel& panel);

/// Adjacency CSV `i,j` (0-based ids).
SpatialWeights load_adjacency(const std::string& path, std::optional<Eigen::Index> n = std::nullopt);

/// Coordinates CSV `id,x,y`; ids must be 0..n-1.
SpatialWeights load_distance_weights(const std::string& path, double radius);

/// Weight matrix as an `i,j,w` edge list.
void save_weights(const std::string& path, const SpatialWeights& w);
SpatialWeights load_weights(const std::string& path, std::optional<Eigen::Index> n = std::nullopt,
                            bool standardized = false);

/// Fit table `block,coef,estimate,std_error,t_stat` with blocks intercept /
/// beta / psi / pi / sigma; fixed coefficients carry empty std_error.
void save_fit(const std::string& path, const FitResult& fit, bool first_regressor_is_intercept);

/// Study summary in long format `param_group,param,side,n,T,rmse,bias,n_fail`.
void save_mc(const std::string& path, const McResult& res);

/// Run manifest (JSON): seed, preset/config echo, version, wall time.
void save_mc_manifest(const std::string& path, const McResult& res, const std::string& preset_label);

/// ilr coordinate panel `region_id,time,coord,value` (coord 1..D-1).
void save_coordinates(const std::string& path, const std::vector<std::string>& regions,
                      const std::vector<std::string>& time_labels,
                      const std::vector<Eigen::MatrixXd>& coords);

struct CoordinatePanel {
  std::vector<std::string> regions;
  std::vector<std::string> time_labels;
  std::vector<Eigen::MatrixXd> coords;  // per time, n x (D-1)
};

CoordinatePanel load_coordinate_panel(const std::string& path);

/// Parse an McConfig from JSON or `key = value` lines (sides, horizons,
/// replications, seed, threads, burn_in plus the parameter matrices).
McConfig load_mc_config(const std::string& path);

}  // namespace cstar
