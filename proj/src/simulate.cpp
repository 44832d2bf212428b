#include "cstar/simulate.hpp"

#include <cmath>

namespace cstar {

namespace {

Eigen::MatrixXd draw_matrix(RngStream& rng, Eigen::Index rows, Eigen::Index cols, NoiseKind kind, double df,
                            double sd) {
  Eigen::MatrixXd m(rows, cols);
  // column-major fill keeps the draw order independent of storage tricks
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      m(i, j) = kind == NoiseKind::gaussian ? rng.normal(sd) : sd * rng.student_t(df);
  return m;
}

}  // namespace

SimOutput simulate(const SimConfig& cfg, std::shared_ptr<const WeightsSpectrum> ws) {
  cfg.params.validate();
  if (cfg.T < 1) throw ValidationError("simulation horizon must be >= 1");
  if (cfg.burn_in < 0) throw ValidationError("burn-in must be >= 0");
  if (cfg.regressors.count() != cfg.params.q())
    throw ValidationError("regressor spec and B disagree on q");
  if (ws->size() < 1) throw ValidationError("weight matrix is empty");

  const Eigen::Index n = ws->size(), p = cfg.params.p(), q = cfg.params.q();
  SpatialFilter filter(cfg.params.Psi, ws, cfg.stability_margin);
  if (!filter.stable())
    throw NumericError("unstable configuration: max |mu nu| = " +
                       std::to_string(filter.stability().spectral_product));

  // stationary_draw is implemented as a long pre-sample
  Eigen::Index burn = cfg.burn_in;
  if (cfg.y0 == Y0Spec::stationary_draw) burn = std::max<Eigen::Index>(burn, 500);

  RngStream rng = RngStream(cfg.seed).derive(0x5e11u);
  const double sd = std::sqrt(cfg.params.sigma2);

  SimOutput out;
  out.panel.Y0 = Eigen::MatrixXd::Zero(n, p);
  out.panel.Y.reserve(static_cast<std::size_t>(cfg.T));
  out.panel.X.reserve(static_cast<std::size_t>(cfg.T));
  out.innovations.reserve(static_cast<std::size_t>(cfg.T));

  Eigen::MatrixXd y_prev = Eigen::MatrixXd::Zero(n, p);
  for (Eigen::Index t = 0; t < burn + cfg.T; ++t) {
    std::vector<Eigen::MatrixXd> xt;
    xt.reserve(static_cast<std::size_t>(q));
    if (cfg.regressors.intercept) xt.push_back(Eigen::MatrixXd::Ones(n, p));
    for (Eigen::Index i = 0; i < cfg.regressors.n_random; ++i)
      xt.push_back(draw_matrix(rng, n, p, NoiseKind::gaussian, 0.0, 1.0));

    Eigen::MatrixXd e = sd > 0.0 ? draw_matrix(rng, n, p, cfg.noise, cfg.student_t_df, sd)
                                 : Eigen::MatrixXd::Zero(n, p);

    Eigen::MatrixXd r = y_prev * cfg.params.Pi + e;
    if (q > 0) r += regression_term(cfg.params.B, xt);
    Eigen::MatrixXd y = filter.solve(r);

    if (t == burn - 1) out.panel.Y0 = y;
    if (t >= burn) {
      out.panel.Y.push_back(y);
      out.panel.X.push_back(std::move(xt));
      out.innovations.push_back(std::move(e));
    }
    y_prev = std::move(y);
  }
  out.panel.validate();
  return out;
}

SimOutput simulate(const SimConfig& cfg, const SpatialWeights& w) {
  return simulate(cfg, std::make_shared<WeightsSpectrum>(w));
}

std::vector<Eigen::MatrixXd> simulate_compositions(const SimConfig& cfg, const SpatialWeights& w,
                                                   const IlrBasis& basis) {
  if (basis.coord_dim() != cfg.params.p())
    throw ValidationError("basis dimension D-1 must equal the transformed dimension p");
  SimOutput sim = simulate(cfg, w);
  std::vector<Eigen::MatrixXd> panels;
  panels.reserve(sim.panel.Y.size());
  for (const auto& y : sim.panel.Y) {
    Eigen::MatrixXd shares(y.rows(), basis.dim());
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      shares.row(i) = ilr_inv(y.row(i).transpose(), basis).shares().transpose();
    panels.push_back(std::move(shares));
  }
  return panels;
}

}  // namespace cstar
