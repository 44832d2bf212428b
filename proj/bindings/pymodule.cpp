#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cstar/estimate.hpp"
#include "cstar/io.hpp"
#include "cstar/montecarlo.hpp"
#include "cstar/simulate.hpp"

namespace py = pybind11;
using namespace cstar;

namespace {

BasisMode basis_from_string(const std::string& s) {
  if (s == "helmert") return BasisMode::helmert;
  if (s == "balance") return BasisMode::balance;
  if (s == "pivot") return BasisMode::pivot;
  throw ValidationError("unknown basis '" + s + "'");
}

Composition as_composition(const Eigen::VectorXd& parts, double kappa) { return closure(parts, kappa); }

PanelData panel_from_arrays(const Eigen::MatrixXd& y0, const std::vector<Eigen::MatrixXd>& y,
                            const std::vector<std::vector<Eigen::MatrixXd>>& x) {
  PanelData d;
  d.Y0 = y0;
  d.Y = y;
  d.X = x;
  d.validate();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "spatiotemporal multivariate autoregression for compositional panels";
  m.attr("__version__") = kVersion;

  py::register_exception<ValidationError>(m, "CstarValidationError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "CstarNumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "CstarIoError", PyExc_IOError);

  // --- simplex ------------------------------------------------------------
  m.def("closure", [](const Eigen::VectorXd& v, double kappa) { return closure(v, kappa).parts(); },
        py::arg("v"), py::arg("kappa") = 1.0, "Rescale a positive vector to sum to kappa.");
  m.def("perturb",
        [](const Eigen::VectorXd& x, const Eigen::VectorXd& y, double kappa) {
          return perturb(as_composition(x, kappa), as_composition(y, kappa)).parts();
        },
        py::arg("x"), py::arg("y"), py::arg("kappa") = 1.0);
  m.def("power",
        [](double xi, const Eigen::VectorXd& x, double kappa) {
          return power(xi, as_composition(x, kappa)).parts();
        },
        py::arg("xi"), py::arg("x"), py::arg("kappa") = 1.0);
  m.def("aitchison_inner",
        [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
          return aitchison_inner(as_composition(x, 1.0), as_composition(y, 1.0));
        },
        py::arg("x"), py::arg("y"));
  m.def("aitchison_dist",
        [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
          return aitchison_dist(as_composition(x, 1.0), as_composition(y, 1.0));
        },
        py::arg("x"), py::arg("y"));
  m.def("clr", [](const Eigen::VectorXd& x) { return clr(as_composition(x, 1.0)); }, py::arg("x"));
  m.def("build_basis",
        [](Eigen::Index dim, const std::string& mode, std::optional<Eigen::MatrixXi> partition) {
          return build_basis(dim, basis_from_string(mode), partition).contrast();
        },
        py::arg("dim"), py::arg("mode") = "helmert", py::arg("partition") = std::nullopt,
        "Contrast matrix of an orthonormal ilr basis.");
  m.def("ilr",
        [](const Eigen::VectorXd& x, const std::string& mode) {
          return ilr(as_composition(x, 1.0), build_basis(x.size(), basis_from_string(mode)));
        },
        py::arg("x"), py::arg("basis") = "helmert");
  m.def("ilr_inv",
        [](const Eigen::VectorXd& y, const std::string& mode, double kappa) {
          return ilr_inv(y, build_basis(y.size() + 1, basis_from_string(mode)), kappa).parts();
        },
        py::arg("y"), py::arg("basis") = "helmert", py::arg("kappa") = 1.0);

  // --- weights ------------------------------------------------------------
  py::class_<SpatialWeights>(m, "SpatialWeights")
      .def_property_readonly("n", &SpatialWeights::size)
      .def_property_readonly("standardized", &SpatialWeights::standardized)
      .def("dense", &SpatialWeights::dense)
      .def("islands", &SpatialWeights::islands)
      .def("__repr__", [](const SpatialWeights& w) {
        return "SpatialWeights(n=" + std::to_string(w.size()) +
               ", nnz=" + std::to_string(w.nonzeros()) + ")";
      });
  m.def("rook_grid", &rook_grid, py::arg("side"));
  m.def("from_adjacency",
        [](Eigen::Index n, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& pairs) {
          return from_adjacency(n, pairs);
        },
        py::arg("n"), py::arg("pairs"));
  m.def("distance_cutoff", &distance_cutoff, py::arg("coords"), py::arg("radius"));
  m.def("row_standardize", &row_standardize, py::arg("w"));
  m.def("sparsity", &sparsity, py::arg("w"));
  m.def("weights_from_dense",
        [](const Eigen::MatrixXd& dense, bool standardized) {
          std::vector<Eigen::Triplet<double>> trip;
          for (Eigen::Index i = 0; i < dense.rows(); ++i)
            for (Eigen::Index j = 0; j < dense.cols(); ++j)
              if (dense(i, j) != 0.0) trip.emplace_back(i, j, dense(i, j));
          return SpatialWeights(dense.rows(), trip, standardized);
        },
        py::arg("dense"), py::arg("standardized") = false);

  // --- model --------------------------------------------------------------
  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init([](const Eigen::MatrixXd& b, const Eigen::MatrixXd& psi, const Eigen::MatrixXd& pi,
                       double sigma2) {
             ModelParams p{b, psi, pi, sigma2};
             p.validate();
             return p;
           }),
           py::arg("B"), py::arg("Psi"), py::arg("Pi"), py::arg("sigma2"))
      .def_readonly("B", &ModelParams::B)
      .def_readonly("Psi", &ModelParams::Psi)
      .def_readonly("Pi", &ModelParams::Pi)
      .def_readonly("sigma2", &ModelParams::sigma2);

  m.def("stability_check",
        [](const Eigen::MatrixXd& psi, const SpatialWeights& w, double margin) {
          StabilityReport r = stability_check(psi, w, margin);
          py::dict d;
          d["stable"] = r.stable;
          d["spectral_product"] = r.spectral_product;
          d["psi_norm_1"] = r.psi_norm_1;
          d["w_norm_inf"] = r.w_norm_inf;
          d["sufficient_bound_ok"] = r.sufficient_bound_ok;
          return d;
        },
        py::arg("psi"), py::arg("w"), py::arg("margin") = 1e-6);
  m.def("apply_filter",
        [](const Eigen::MatrixXd& psi, const SpatialWeights& w, const Eigen::MatrixXd& y) {
          return SpatialFilter(psi, std::make_shared<WeightsSpectrum>(w)).apply(y);
        },
        py::arg("psi"), py::arg("w"), py::arg("y"));
  m.def("solve_filter",
        [](const Eigen::MatrixXd& psi, const SpatialWeights& w, const Eigen::MatrixXd& r) {
          return SpatialFilter(psi, std::make_shared<WeightsSpectrum>(w)).solve(r);
        },
        py::arg("psi"), py::arg("w"), py::arg("r"));
  m.def("log_det_filter",
        [](const Eigen::MatrixXd& psi, const SpatialWeights& w) {
          return SpatialFilter(psi, std::make_shared<WeightsSpectrum>(w)).log_det();
        },
        py::arg("psi"), py::arg("w"));
  m.def("residuals",
        [](const ModelParams& params, const Eigen::MatrixXd& y0, const std::vector<Eigen::MatrixXd>& y,
           const std::vector<std::vector<Eigen::MatrixXd>>& x, const SpatialWeights& w) {
          return residuals(params, panel_from_arrays(y0, y, x), w);
        },
        py::arg("params"), py::arg("Y0"), py::arg("Y"), py::arg("X"), py::arg("w"));
  m.def("temporal_spectral_radius",
        [](const Eigen::MatrixXd& psi, const Eigen::MatrixXd& pi, const SpatialWeights& w) {
          return temporal_spectral_radius(psi, pi, WeightsSpectrum(w));
        },
        py::arg("psi"), py::arg("pi"), py::arg("w"));

  // --- simulate -----------------------------------------------------------
  m.def("simulate",
        [](const ModelParams& params, const SpatialWeights& w, Eigen::Index T, Eigen::Index burn_in,
           std::uint64_t seed, bool intercept, Eigen::Index n_random) {
          SimConfig cfg;
          cfg.params = params;
          cfg.T = T;
          cfg.burn_in = burn_in;
          cfg.seed = seed;
          cfg.regressors = {intercept, n_random};
          SimOutput out = simulate(cfg, w);
          py::dict d;
          d["Y0"] = out.panel.Y0;
          d["Y"] = out.panel.Y;
          d["X"] = out.panel.X;
          d["innovations"] = out.innovations;
          return d;
        },
        py::arg("params"), py::arg("w"), py::arg("T"), py::arg("burn_in") = 100, py::arg("seed") = 0,
        py::arg("intercept") = true, py::arg("n_random") = 2);

  // --- estimate -----------------------------------------------------------
  py::class_<FitResult>(m, "FitResult")
      .def_property_readonly("B", [](const FitResult& f) { return f.params.B; })
      .def_property_readonly("Psi", [](const FitResult& f) { return f.params.Psi; })
      .def_property_readonly("Pi", [](const FitResult& f) { return f.params.Pi; })
      .def_property_readonly("sigma2", [](const FitResult& f) { return f.params.sigma2; })
      .def_readonly("loglik", &FitResult::loglik)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("estimates", &FitResult::estimates)
      .def_readonly("std_errors", &FitResult::std_errors)
      .def_readonly("t_stats", &FitResult::t_stats)
      .def_readonly("vcov", &FitResult::vcov)
      .def("parameter_names",
           [](const FitResult& f, bool intercept) { return parameter_names(f.q(), f.p(), intercept); },
           py::arg("intercept") = true);

  m.def("loglik",
        [](const ModelParams& params, const Eigen::MatrixXd& y0, const std::vector<Eigen::MatrixXd>& y,
           const std::vector<std::vector<Eigen::MatrixXd>>& x, const SpatialWeights& w) {
          return loglik(params, panel_from_arrays(y0, y, x), w);
        },
        py::arg("params"), py::arg("Y0"), py::arg("Y"), py::arg("X"), py::arg("w"));
  m.def("fit",
        [](const Eigen::MatrixXd& y0, const std::vector<Eigen::MatrixXd>& y,
           const std::vector<std::vector<Eigen::MatrixXd>>& x, const SpatialWeights& w, bool concentrate,
           const std::string& optimizer, bool psi_zero, bool pi_zero, bool std_errors, int max_iterations) {
          FitOptions opts;
          opts.concentrate = concentrate;
          opts.fix_psi_zero = psi_zero;
          opts.fix_pi_zero = pi_zero;
          opts.compute_std_errors = std_errors;
          opts.max_iterations = max_iterations;
          opts.optimizer = optimizer == "nelder-mead" ? Optimizer::nelder_mead
                                                      : Optimizer::quasi_newton_numeric_gradient;
          return fit(panel_from_arrays(y0, y, x), w, opts);
        },
        py::arg("Y0"), py::arg("Y"), py::arg("X"), py::arg("w"), py::arg("concentrate") = true,
        py::arg("optimizer") = "quasi-newton", py::arg("psi_zero") = false, py::arg("pi_zero") = false,
        py::arg("std_errors") = true, py::arg("max_iterations") = 200);

  // --- monte carlo ---------------------------------------------------------
  m.def("run_study",
        [](const std::vector<Eigen::Index>& sides, const std::vector<Eigen::Index>& horizons, int replications,
           std::uint64_t seed, int threads, std::optional<ModelParams> params) {
          McConfig cfg;
          cfg.grid_sides = sides;
          cfg.horizons = horizons;
          cfg.replications = replications;
          cfg.seed = seed;
          cfg.threads = threads;
          if (params) {
            cfg.params = *params;
            cfg.regressors = {true, std::max<Eigen::Index>(params->q() - 1, 0)};
          }
          McResult res = run_study(cfg);
          py::list rows;
          for (const auto& r : summarize(res)) {
            py::dict d;
            d["param_group"] = r.param_group;
            d["param"] = r.param;
            d["side"] = r.side;
            d["n"] = r.n;
            d["T"] = r.T;
            d["rmse"] = r.rmse;
            d["bias"] = r.bias;
            d["n_fail"] = r.n_fail;
            rows.append(d);
          }
          return rows;
        },
        py::arg("sides"), py::arg("horizons"), py::arg("replications"), py::arg("seed") = 0,
        py::arg("threads") = 0, py::arg("params") = std::nullopt);
}
