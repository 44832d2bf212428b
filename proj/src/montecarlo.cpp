#include "cstar/montecarlo.hpp"

#include <atomic>
#include <chrono>
#include <limits>
#include <thread>

namespace cstar {

ModelParams McConfig::default_params() {
  ModelParams p;
  p.Psi.resize(2, 2);
  p.Psi << 0.7, 0.2, 0.1, 0.7;
  p.Pi.resize(2, 2);
  p.Pi << 0.1, 0.1, 0.2, 0.1;
  p.B.resize(3, 2);
  p.B << 1.0, 2.0, -2.0, 1.0, 3.0, -2.0;
  p.sigma2 = 1.0;
  return p;
}

FitOptions McConfig::mc_fit_options() {
  FitOptions o;
  o.concentrate = true;
  o.compute_std_errors = false;  // the study tracks point estimates only
  o.max_iterations = 300;
  return o;
}

void McConfig::validate() const {
  if (replications < 1) throw ValidationError("replications must be >= 1");
  if (grid_sides.empty() || horizons.empty()) throw ValidationError("grid must be nonempty");
  for (auto s : grid_sides)
    if (s < 2) throw ValidationError("grid sides must be >= 2");
  for (auto t : horizons)
    if (t < 2) throw ValidationError("horizons must be >= 2");
  if (burn_in < 0) throw ValidationError("burn-in must be >= 0");
  params.validate();
  if (regressors.count() != params.B.rows()) throw ValidationError("regressor spec and B disagree on q");
  fit_options.validate();
}

McConfig quick_preset() {
  McConfig cfg;
  cfg.grid_sides = {4, 6};
  cfg.horizons = {20, 80};
  cfg.replications = 20;
  return cfg;
}

McConfig full_preset() { return McConfig{}; }

namespace {

Eigen::VectorXd truth_vector(const ModelParams& params) {
  const Eigen::Index q = params.q(), p = params.p();
  Eigen::VectorXd th(q * p + 2 * p * p + 1);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < q; ++i) th[beta_index(q, p, i, j)] = params.B(i, j);
  for (Eigen::Index k = 0; k < p; ++k)
    for (Eigen::Index j = 0; j < p; ++j) {
      th[psi_index(q, p, j, k)] = params.Psi(j, k);
      th[pi_index(q, p, j, k)] = params.Pi(j, k);
    }
  th[sigma_index(q, p)] = params.sigma2;
  return th;
}

}  // namespace

McResult run_study(const McConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();

  McResult res;
  res.config = cfg;
  res.names = parameter_names(cfg.params.q(), cfg.params.p(), cfg.regressors.intercept);
  res.names.back() = "sigma2";  // the study tracks the variance, not its root

  const Eigen::VectorXd truth = truth_vector(cfg.params);
  const Eigen::Index dim = truth.size();

  int n_threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;

  std::uint64_t cell_index = 0;
  for (Eigen::Index side : cfg.grid_sides) {
    auto ws = std::make_shared<WeightsSpectrum>(row_standardize(rook_grid(side)));
    {
      StabilityReport rep = stability_check(cfg.params.Psi, *ws, cfg.fit_options.stability_margin);
      if (!rep.stable)
        throw NumericError("study parameters fail the stability check on the side-" + std::to_string(side) +
                           " grid");
    }
    for (Eigen::Index horizon : cfg.horizons) {
      McCell cell;
      cell.side = side;
      cell.n = side * side;
      cell.T = horizon;
      cell.replications = cfg.replications;

      std::vector<Eigen::VectorXd> slots(static_cast<std::size_t>(cfg.replications));
      std::vector<char> ok(static_cast<std::size_t>(cfg.replications), 0);
      std::atomic<int> next{0};

      auto worker = [&]() {
        for (;;) {
          const int r = next.fetch_add(1);
          if (r >= cfg.replications) return;
          // stream keyed on (seed, cell, replication): reproducible and
          // independent of scheduling
          RngStream stream = RngStream(cfg.seed).derive(cell_index, static_cast<std::uint64_t>(r));
          SimConfig sim;
          sim.params = cfg.params;
          sim.T = horizon;
          sim.burn_in = cfg.burn_in;
          sim.seed = stream.next_u64();
          sim.regressors = cfg.regressors;
          sim.stability_margin = cfg.fit_options.stability_margin;
          try {
            SimOutput out = simulate(sim, ws);
            FitResult f = fit(out.panel, ws->weights(), cfg.fit_options);
            if (f.converged) {
              Eigen::VectorXd est = f.estimates;
              est[est.size() - 1] = f.params.sigma2;  // report sigma2, not sigma_eps
              slots[static_cast<std::size_t>(r)] = std::move(est);
              ok[static_cast<std::size_t>(r)] = 1;
            }
          } catch (const std::exception&) {
            // counted below as a failed replication
          }
        }
      };

      if (n_threads == 1 || cfg.replications == 1) {
        worker();
      } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < std::min(n_threads, cfg.replications); ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
      }

      Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
      Eigen::VectorXd bias = Eigen::VectorXd::Zero(dim);
      int kept = 0;
      for (int r = 0; r < cfg.replications; ++r) {
        if (!ok[static_cast<std::size_t>(r)]) continue;
        const Eigen::VectorXd d = slots[static_cast<std::size_t>(r)] - truth;
        sq += d.cwiseProduct(d);
        bias += d;
        cell.estimates.push_back(slots[static_cast<std::size_t>(r)]);
        ++kept;
      }
      cell.failures = cfg.replications - kept;
      if (kept > 0) {
        cell.rmse = (sq / kept).cwiseSqrt();
        cell.bias = bias / kept;
      } else {
        cell.rmse = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::quiet_NaN());
        cell.bias = cell.rmse;
      }
      res.cells.push_back(std::move(cell));
      ++cell_index;
    }
  }

  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

std::vector<McSummaryRow> summarize(const McResult& res) {
  if (res.cells.empty()) throw ValidationError("empty study result");
  const Eigen::Index q = res.config.params.q(), p = res.config.params.p();
  std::vector<McSummaryRow> rows;

  struct GroupSpec {
    std::string name;
    std::vector<Eigen::Index> idx;
  };
  std::vector<GroupSpec> groups;
  {
    GroupSpec beta{"beta", {}}, psi{"psi", {}}, pi{"pi", {}}, sigma{"sigma2", {}};
    for (Eigen::Index i = 0; i < q; ++i)
      for (Eigen::Index j = 0; j < p; ++j) beta.idx.push_back(beta_index(q, p, i, j));
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index k = 0; k < p; ++k) psi.idx.push_back(psi_index(q, p, j, k));
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index k = 0; k < p; ++k) pi.idx.push_back(pi_index(q, p, j, k));
    sigma.idx.push_back(sigma_index(q, p));
    groups = {beta, psi, pi, sigma};
  }

  for (const auto& cell : res.cells) {
    for (const auto& g : groups) {
      double rmse_sum = 0.0, bias_sum = 0.0;
      for (Eigen::Index idx : g.idx) {
        McSummaryRow row;
        row.param_group = g.name;
        row.param = res.names[static_cast<std::size_t>(idx)];
        row.side = cell.side;
        row.n = cell.n;
        row.T = cell.T;
        row.rmse = cell.rmse[idx];
        row.bias = cell.bias[idx];
        row.n_fail = cell.failures;
        rmse_sum += cell.rmse[idx];
        bias_sum += cell.bias[idx];
        rows.push_back(std::move(row));
      }
      McSummaryRow avg;
      avg.param_group = g.name;
      avg.param = "group_avg";
      avg.side = cell.side;
      avg.n = cell.n;
      avg.T = cell.T;
      avg.rmse = rmse_sum / static_cast<double>(g.idx.size());
      avg.bias = bias_sum / static_cast<double>(g.idx.size());
      avg.n_fail = cell.failures;
      rows.push_back(std::move(avg));
    }
  }
  return rows;
}

}  // namespace cstar
