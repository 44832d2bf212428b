// cstar command line: transform / weights / simulate / fit / mc.
// Exit codes: 0 ok, 2 validation error, 3 numeric error (incl. NotConverged),
// 4 io error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "cstar/estimate.hpp"
#include "cstar/io.hpp"
#include "cstar/montecarlo.hpp"
#include "cstar/simulate.hpp"

namespace {

using namespace cstar;

BasisMode parse_basis(const std::string& s) {
  if (s == "helmert") return BasisMode::helmert;
  if (s == "balance") return BasisMode::balance;
  if (s == "pivot") return BasisMode::pivot;
  throw ValidationError("unknown basis '" + s + "' (helmert, balance, pivot)");
}

struct WeightsChoice {
  std::string weights_file;
  Eigen::Index rook_side = 0;
  bool standardize = true;

  SpatialWeights build() const {
    if (rook_side > 0 && !weights_file.empty())
      throw ValidationError("give either --weights or --rook-side, not both");
    if (rook_side > 0) {
      SpatialWeights w = rook_grid(rook_side);
      return standardize ? row_standardize(w) : w;
    }
    if (weights_file.empty()) throw ValidationError("a weight matrix is required (--weights or --rook-side)");
    SpatialWeights w = load_weights(weights_file);
    return standardize ? row_standardize(w) : w;
  }
};

nlohmann::json fit_to_json(const FitResult& fit, bool intercept) {
  nlohmann::json j;
  const auto names = parameter_names(fit.q(), fit.p(), intercept);
  nlohmann::json coefs = nlohmann::json::array();
  for (Eigen::Index i = 0; i < fit.estimates.size(); ++i) {
    nlohmann::json c;
    c["coef"] = names[static_cast<std::size_t>(i)];
    c["estimate"] = fit.estimates[i];
    if (std::isfinite(fit.std_errors[i])) c["std_error"] = fit.std_errors[i];
    if (std::isfinite(fit.t_stats[i])) c["t_stat"] = fit.t_stats[i];
    coefs.push_back(c);
  }
  j["coefficients"] = coefs;
  j["loglik"] = fit.loglik;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["sigma2"] = fit.params.sigma2;
  return j;
}

void print_fit_table(const FitResult& fit, bool intercept) {
  const Eigen::Index q = fit.q(), p = fit.p();
  const auto names = parameter_names(q, p, intercept);
  auto line = [&](Eigen::Index idx) {
    const double se = fit.std_errors[idx], t = fit.t_stats[idx];
    std::cout << "  " << std::left << std::setw(12) << names[static_cast<std::size_t>(idx)] << std::right
              << std::setw(12) << std::setprecision(4) << std::fixed << fit.estimates[idx];
    if (std::isfinite(se))
      std::cout << std::setw(12) << se << std::setw(10) << std::setprecision(3) << t;
    std::cout << "\n" << std::defaultfloat << std::setprecision(6);
  };
  std::cout << "coefficient        estimate   std_error    t_stat\n";
  if (q > 0) {
    std::cout << (intercept ? "intercept\n" : "regressors\n");
    for (Eigen::Index i = 0; i < q; ++i) {
      if (intercept && i == 1) std::cout << "regressors\n";
      for (Eigen::Index j = 0; j < p; ++j) line(beta_index(q, p, i, j));
    }
  }
  std::cout << "spatial autoregressive effect (psi)\n";
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index k = 0; k < p; ++k) line(psi_index(q, p, j, k));
  std::cout << "temporal autoregressive effect (pi)\n";
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index k = 0; k < p; ++k) line(pi_index(q, p, j, k));
  std::cout << "error scale\n";
  line(sigma_index(q, p));
  std::cout << "loglik " << fit.loglik << (fit.converged ? "" : "  [NOT CONVERGED]") << "\n";
}

int cmd_transform(const std::string& in_csv, const std::string& out_csv, const std::string& basis_name,
                  bool inverse, const std::string& zero_policy, double zero_delta) {
  PanelLoadOptions opts;
  opts.basis = parse_basis(basis_name);
  if (zero_policy == "replace")
    opts.zero_policy = ZeroPolicy::replace;
  else if (zero_policy != "reject")
    throw ValidationError("unknown zero policy '" + zero_policy + "' (reject, replace)");
  opts.zero_delta = zero_delta;

  if (!inverse) {
    LoadedPanel panel = load_panel(in_csv, opts);
    std::vector<Eigen::MatrixXd> coords;
    coords.push_back(panel.data.Y0);
    for (const auto& y : panel.data.Y) coords.push_back(y);
    save_coordinates(out_csv, panel.regions, panel.time_labels, coords);
    if (panel.zeros_replaced > 0)
      std::cerr << "note: replaced " << panel.zeros_replaced << " zero parts with delta = " << zero_delta
                << "\n";
    return 0;
  }

  // coordinates -> shares
  CoordinatePanel cp = load_coordinate_panel(in_csv);
  const Eigen::Index p = cp.coords.empty() ? 0 : cp.coords.front().cols();
  IlrBasis basis = build_basis(p + 1, opts.basis);
  std::vector<Eigen::MatrixXd> shares;
  for (const auto& m : cp.coords) {
    Eigen::MatrixXd s(m.rows(), p + 1);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      s.row(r) = ilr_inv(m.row(r).transpose(), basis).shares().transpose();
    shares.push_back(std::move(s));
  }
  std::vector<std::string> parts;
  for (Eigen::Index c = 0; c < p + 1; ++c) parts.push_back("part_" + std::to_string(c + 1));
  save_panel(out_csv, cp.regions, cp.time_labels, parts, shares);
  return 0;
}

int cmd_weights(const std::string& kind, Eigen::Index side, const std::string& adjacency,
                const std::string& coords, double radius, bool standardize, const std::string& out_csv,
                bool as_json) {
  std::optional<SpatialWeights> w;
  if (kind == "rook") {
    w = rook_grid(side);
  } else if (kind == "adjacency") {
    w = load_adjacency(adjacency);
  } else if (kind == "distance") {
    w = load_distance_weights(coords, radius);
  } else {
    throw ValidationError("unknown weights kind '" + kind + "' (rook, adjacency, distance)");
  }
  if (standardize) w = row_standardize(*w);
  save_weights(out_csv, *w);

  const auto isl = w->islands();
  if (!isl.empty()) {
    std::cerr << "warning: " << isl.size() << " island(s) with no neighbours:";
    for (auto i : isl) std::cerr << ' ' << i;
    std::cerr << "\n";
  }
  if (as_json) {
    nlohmann::json j;
    j["n"] = w->size();
    j["nonzeros"] = w->nonzeros();
    j["sparsity"] = sparsity(*w);
    j["standardized"] = w->standardized();
    j["islands"] = isl;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "n=" << w->size() << " nonzeros=" << w->nonzeros() << " sparsity=" << sparsity(*w) << "\n";
  }
  return 0;
}

ModelParams params_from_flags(const std::string& params_file, double sigma2) {
  ModelParams params = McConfig::default_params();
  if (!params_file.empty()) {
    // reuse the study config parser for the parameter block
    McConfig cfg = load_mc_config(params_file);
    params = cfg.params;
  }
  params.sigma2 = sigma2;
  return params;
}

int cmd_simulate(Eigen::Index side, Eigen::Index T, Eigen::Index burn_in, std::uint64_t seed, double sigma2,
                 const std::string& params_file, const std::string& basis_name, const std::string& out_panel,
                 const std::string& out_regressors) {
  ModelParams params = params_from_flags(params_file, sigma2);
  SimConfig cfg;
  cfg.params = params;
  cfg.T = T;
  cfg.burn_in = burn_in;
  cfg.seed = seed;
  cfg.regressors = {true, params.q() > 0 ? params.q() - 1 : 0};

  SpatialWeights w = row_standardize(rook_grid(side));
  auto ws = std::make_shared<WeightsSpectrum>(w);
  const double joint = temporal_spectral_radius(params.Psi, params.Pi, *ws);
  if (joint >= 1.0)
    std::cerr << "warning: joint temporal spectral radius " << joint
              << " >= 1; the process is explosive. Magnitudes grow geometrically; consider --burnin 0 and short"
                 " horizons.\n";

  SimOutput sim = simulate(cfg, ws);
  IlrBasis basis = build_basis(params.p() + 1, parse_basis(basis_name));

  // share panels for Y_0..Y_T; zero-padded ids keep the lexicographic region
  // order aligned with the grid's row-major cell order
  std::vector<std::string> regions, parts, labels;
  int width = 1;
  for (Eigen::Index v = w.size() - 1; v >= 10; v /= 10) ++width;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    std::string num = std::to_string(i);
    regions.push_back("r" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num);
  }
  for (Eigen::Index c = 0; c <= params.p(); ++c) parts.push_back("part_" + std::to_string(c + 1));
  std::vector<Eigen::MatrixXd> shares;
  auto to_shares = [&](const Eigen::MatrixXd& y) {
    Eigen::MatrixXd s(y.rows(), params.p() + 1);
    for (Eigen::Index r = 0; r < y.rows(); ++r)
      s.row(r) = ilr_inv(y.row(r).transpose(), basis).shares().transpose();
    return s;
  };
  labels.push_back("0");
  shares.push_back(to_shares(sim.panel.Y0));
  for (Eigen::Index t = 0; t < T; ++t) {
    labels.push_back(std::to_string(t + 1));
    shares.push_back(to_shares(sim.panel.Y[static_cast<std::size_t>(t)]));
  }
  save_panel(out_panel, regions, labels, parts, shares);

  if (!out_regressors.empty()) {
    std::ofstream out(out_regressors);
    if (!out) throw IoError("cannot write '" + out_regressors + "'");
    out << "region_id,time,regressor,component,value\n";
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index i = 1; i < params.q(); ++i)  // intercept is implicit via --intercept
        for (Eigen::Index r = 0; r < w.size(); ++r)
          for (Eigen::Index j = 0; j < params.p(); ++j)
            out << regions[static_cast<std::size_t>(r)] << ',' << t + 1 << ",x" << i << ',' << j + 1 << ','
                << format_double(sim.panel.X[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)](r, j))
                << '\n';
  }
  return 0;
}

int cmd_fit(const std::string& panel_csv, const WeightsChoice& wchoice, const std::string& regressors_csv,
            bool intercept, const std::string& basis_name, const std::string& zero_policy, double zero_delta,
            bool concentrate, const std::string& optimizer, bool psi_zero, const std::string& out_csv,
            bool as_json, const std::string& likelihood) {
  PanelLoadOptions lopts;
  lopts.basis = parse_basis(basis_name);
  if (zero_policy == "replace") lopts.zero_policy = ZeroPolicy::replace;
  lopts.zero_delta = zero_delta;
  LoadedPanel panel = load_panel(panel_csv, lopts);

  SpatialWeights w = wchoice.build();
  if (w.size() != panel.data.n())
    throw ValidationError("weight matrix size " + std::to_string(w.size()) + " does not match " +
                          std::to_string(panel.data.n()) + " regions");

  // assemble regressors: optional intercept + optional file
  std::vector<std::vector<Eigen::MatrixXd>> x;
  if (!regressors_csv.empty()) x = load_regressors(regressors_csv, panel);
  if (intercept) {
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(panel.data.n(), panel.data.p());
    if (x.empty()) x.assign(static_cast<std::size_t>(panel.data.T()), {});
    for (auto& xt : x) xt.insert(xt.begin(), ones);
  }
  panel.data.X = std::move(x);
  panel.data.validate();

  FitOptions fopts;
  fopts.concentrate = concentrate;
  fopts.fix_psi_zero = psi_zero;
  if (optimizer == "nelder-mead")
    fopts.optimizer = Optimizer::nelder_mead;
  else if (optimizer != "quasi-newton")
    throw ValidationError("unknown optimizer '" + optimizer + "' (quasi-newton, nelder-mead)");

  FitResult result = fit(panel.data, w, fopts);
  print_fit_table(result, intercept);
  if (!out_csv.empty()) save_fit(out_csv, result, intercept);
  if (as_json) std::cout << fit_to_json(result, intercept).dump(2) << "\n";

  if (likelihood == "paper-verbatim") {
    const double lv = loglik_paper_form(result.params, panel.data, w);
    std::cout << "paper-verbatim log-likelihood at the estimates (experimental, diagnostics only): " << lv
              << "\n";
  } else if (likelihood != "standard") {
    throw ValidationError("unknown likelihood '" + likelihood + "' (standard, paper-verbatim)");
  }
  return result.converged ? 0 : 3;
}

int cmd_mc(const std::string& preset, const std::string& config_file, std::uint64_t seed, int threads,
           const std::string& out_prefix) {
  McConfig cfg;
  std::string label = preset;
  if (!config_file.empty()) {
    cfg = load_mc_config(config_file);
    label = "config:" + config_file;
  } else if (preset == "quick") {
    cfg = quick_preset();
  } else if (preset == "full") {
    cfg = full_preset();
  } else {
    throw ValidationError("unknown preset '" + preset + "' (quick, full)");
  }
  cfg.seed = seed;
  cfg.threads = threads;

  McResult res = run_study(cfg);
  save_mc(out_prefix + "_rmse.csv", res);
  save_mc_manifest(out_prefix + "_manifest.json", res, label);

  int total_fail = 0, total_rep = 0;
  for (const auto& c : res.cells) {
    total_fail += c.failures;
    total_rep += c.replications;
  }
  std::cout << "cells=" << res.cells.size() << " replications=" << cfg.replications
            << " failures=" << total_fail << "/" << total_rep << " wall=" << res.wall_seconds << "s\n"
            << "wrote " << out_prefix << "_rmse.csv and " << out_prefix << "_manifest.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatiotemporal multivariate autoregression for compositional panels"};
  app.require_subcommand(1);
  app.fallthrough();  // global --seed/--threads may follow the subcommand

  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--seed", seed, "random seed (decimal 64-bit)")->capture_default_str();
  app.add_option("--threads", threads, "worker pool cap (0 = available parallelism)")->capture_default_str();

  // transform
  auto* t = app.add_subcommand("transform", "ilr-transform a share panel (or invert coordinates)");
  std::string t_in, t_out, t_basis = "helmert", t_zero = "reject";
  double t_delta = 1e-6;
  bool t_inverse = false;
  t->add_option("--input", t_in, "input CSV")->required();
  t->add_option("--output", t_out, "output CSV")->required();
  t->add_option("--basis", t_basis, "helmert | balance | pivot")->capture_default_str();
  t->add_flag("--inverse", t_inverse, "coordinates -> shares instead of shares -> coordinates");
  t->add_option("--zero-policy", t_zero, "reject | replace")->capture_default_str();
  t->add_option("--zero-delta", t_delta, "replacement share for zero parts")->capture_default_str();

  // weights
  auto* wsub = app.add_subcommand("weights", "construct a spatial weight matrix");
  std::string w_kind = "rook", w_adj, w_coords, w_out;
  Eigen::Index w_side = 4;
  double w_radius = 1.0;
  bool w_std = false, w_json = false;
  wsub->add_option("--kind", w_kind, "rook | adjacency | distance")->capture_default_str();
  wsub->add_option("--side", w_side, "grid side for rook")->capture_default_str();
  wsub->add_option("--adjacency", w_adj, "adjacency CSV (i,j)");
  wsub->add_option("--coords", w_coords, "coordinates CSV (id,x,y)");
  wsub->add_option("--radius", w_radius, "distance cutoff radius")->capture_default_str();
  wsub->add_flag("--row-standardize", w_std, "divide rows by their sums");
  wsub->add_option("--output", w_out, "output edge list CSV")->required();
  wsub->add_flag("--json", w_json, "print a JSON summary");

  // simulate
  auto* s = app.add_subcommand("simulate", "simulate a compositional panel on a rook grid");
  Eigen::Index s_side = 4, s_T = 20, s_burn = 100;
  double s_sigma2 = 1.0;
  std::string s_params, s_basis = "helmert", s_panel, s_regs;
  s->add_option("--side", s_side, "grid side (n = side^2)")->capture_default_str();
  s->add_option("--T", s_T, "time points")->capture_default_str();
  s->add_option("--burnin", s_burn, "discarded pre-sample periods")->capture_default_str();
  s->add_option("--sigma2", s_sigma2, "innovation variance")->capture_default_str();
  s->add_option("--params", s_params, "parameter file (JSON or key=value); defaults to the reference design");
  s->add_option("--basis", s_basis, "helmert | balance | pivot")->capture_default_str();
  s->add_option("--output", s_panel, "output share panel CSV")->required();
  s->add_option("--regressors-out", s_regs, "also write the drawn regressors");

  // fit
  auto* f = app.add_subcommand("fit", "quasi-maximum-likelihood fit of a share panel");
  std::string f_panel, f_regs, f_basis = "helmert", f_zero = "reject", f_opt = "quasi-newton", f_out,
              f_likelihood = "standard";
  WeightsChoice f_w;
  double f_delta = 1e-6;
  bool f_intercept = false, f_json = false, f_psi_zero = false, f_no_conc = false, f_no_std = false;
  f->add_option("--panel", f_panel, "share panel CSV")->required();
  f->add_option("--weights", f_w.weights_file, "weight matrix CSV (i,j,w)");
  f->add_option("--rook-side", f_w.rook_side, "use a row-standardized rook grid of this side");
  f->add_flag("--no-row-standardize", f_no_std, "keep the weight matrix as loaded");
  f->add_option("--regressors", f_regs, "regressor CSV");
  f->add_flag("--intercept", f_intercept, "prepend an all-ones regressor");
  f->add_option("--basis", f_basis, "helmert | balance | pivot")->capture_default_str();
  f->add_option("--zero-policy", f_zero, "reject | replace")->capture_default_str();
  f->add_option("--zero-delta", f_delta, "replacement share for zero parts")->capture_default_str();
  f->add_flag("--no-concentrate", f_no_conc, "optimize the full parameter vector instead of profiling");
  f->add_option("--optimizer", f_opt, "quasi-newton | nelder-mead")->capture_default_str();
  f->add_flag("--psi-zero", f_psi_zero, "restrict the spatial matrix to zero");
  f->add_option("--output", f_out, "fit table CSV");
  f->add_flag("--json", f_json, "print the fit as JSON");
  f->add_option("--likelihood", f_likelihood,
                "standard | paper-verbatim (the latter is evaluated at the estimates, diagnostics only)")
      ->capture_default_str();

  // mc
  auto* m = app.add_subcommand("mc", "replication study: simulate-fit cycles with RMSE aggregation");
  std::string m_preset = "quick", m_config, m_out = "mc";
  m->add_option("--preset", m_preset, "quick | full")->capture_default_str();
  m->add_option("--config", m_config, "study config file (JSON or key=value)");
  m->add_option("--output", m_out, "output prefix")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (t->parsed()) return cmd_transform(t_in, t_out, t_basis, t_inverse, t_zero, t_delta);
    if (wsub->parsed()) return cmd_weights(w_kind, w_side, w_adj, w_coords, w_radius, w_std, w_out, w_json);
    if (s->parsed()) return cmd_simulate(s_side, s_T, s_burn, seed, s_sigma2, s_params, s_basis, s_panel, s_regs);
    if (f->parsed()) {
      f_w.standardize = !f_no_std;
      return cmd_fit(f_panel, f_w, f_regs, f_intercept, f_basis, f_zero, f_delta, !f_no_conc, f_opt, f_psi_zero,
                     f_out, f_json, f_likelihood);
    }
    if (m->parsed()) return cmd_mc(m_preset, m_config, seed, threads, m_out);
  } catch (const cstar::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const cstar::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const cstar::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
