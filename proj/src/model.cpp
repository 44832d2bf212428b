#include "cstar/model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <cmath>
#include <complex>

namespace cstar {

void ModelParams::validate() const {
  const Eigen::Index pp = Psi.rows();
  if (pp < 1 || Psi.cols() != pp) throw ValidationError("Psi must be square with p >= 1");
  if (Pi.rows() != pp || Pi.cols() != pp) throw ValidationError("Pi must match Psi's shape");
  if (B.size() > 0 && B.cols() != pp) throw ValidationError("B must have p columns");
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw ValidationError("sigma2 must be finite and nonnegative");
  if (!Psi.allFinite() || !Pi.allFinite() || !B.allFinite())
    throw ValidationError("model parameters must be finite");
}

void PanelData::validate() const {
  const Eigen::Index nn = Y0.rows(), pp = Y0.cols();
  if (nn < 1 || pp < 1) throw ValidationError("panel needs n >= 1 and p >= 1");
  if (Y.empty()) throw ValidationError("panel needs T >= 1");
  if (!Y0.allFinite()) throw ValidationError("Y0 must be finite");
  if (!X.empty() && static_cast<Eigen::Index>(X.size()) != T())
    throw ValidationError("regressor sequence must cover every time point");
  const std::size_t qq = X.empty() ? 0 : X.front().size();
  for (std::size_t t = 0; t < Y.size(); ++t) {
    if (Y[t].rows() != nn || Y[t].cols() != pp)
      throw ValidationError("Y_" + std::to_string(t + 1) + " has inconsistent shape");
    if (!Y[t].allFinite()) {
      for (Eigen::Index i = 0; i < nn; ++i)
        for (Eigen::Index j = 0; j < pp; ++j)
          if (!std::isfinite(Y[t](i, j)))
            throw ValidationError("non-finite response at unit " + std::to_string(i) + ", time " +
                                  std::to_string(t + 1));
    }
    if (!X.empty()) {
      if (X[t].size() != qq) throw ValidationError("regressor count varies over time");
      for (const auto& x : X[t]) {
        if (x.rows() != nn || x.cols() != pp) throw ValidationError("regressor shape mismatch");
        if (!x.allFinite()) throw ValidationError("regressors must be finite");
      }
    }
  }
}

WeightsSpectrum::WeightsSpectrum(const SpatialWeights& w) : w_(w) {
  const Eigen::Index n = w.size();
  Eigen::MatrixXd dense = w.dense();
  Eigen::EigenSolver<Eigen::MatrixXd> es(dense, /*computeEigenvectors=*/true);
  if (es.info() == Eigen::Success) {
    values_ = es.eigenvalues();
    has_values_ = true;
    basis_ = es.eigenvectors();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(basis_);
    if (lu.isInvertible()) {
      basis_inv_ = lu.inverse();
      // trust the basis only if it actually reconstructs W
      const double err = (basis_ * values_.asDiagonal() * basis_inv_ - dense.cast<std::complex<double>>())
                             .cwiseAbs()
                             .maxCoeff();
      has_basis_ = err < 1e-8 * std::max(1.0, dense.cwiseAbs().maxCoeff());
    }
  }
  if (!has_values_ && n > 0) {
    // eigenvalues failed to converge; leave empty, filters use LU fallbacks
    values_.resize(0);
  }
}

double WeightsSpectrum::spectral_radius() const {
  if (!has_values_) throw NumericError("weight matrix eigenvalues unavailable");
  return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0;
}

namespace {

Eigen::VectorXcd psi_eigenvalues_of(const Eigen::MatrixXd& psi) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(psi, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericError("eigenvalue computation for Psi failed");
  return es.eigenvalues();
}

}  // namespace

StabilityReport stability_check(const Eigen::MatrixXd& psi, const WeightsSpectrum& ws, double margin) {
  if (psi.rows() != psi.cols()) throw ValidationError("Psi must be square");
  StabilityReport rep;
  rep.margin = margin;
  rep.psi_norm_1 = psi.cwiseAbs().colwise().sum().maxCoeff();
  rep.w_norm_inf = ws.weights().norm_inf();
  rep.sufficient_bound_ok = rep.psi_norm_1 * rep.w_norm_inf < 1.0;
  const double rho_psi = psi_eigenvalues_of(psi).cwiseAbs().maxCoeff();
  const double rho_w = ws.has_eigenvalues() ? ws.spectral_radius() : ws.weights().norm_inf();
  rep.spectral_product = rho_psi * rho_w;
  rep.stable = rep.spectral_product < 1.0 - margin;
  return rep;
}

StabilityReport stability_check(const Eigen::MatrixXd& psi, const SpatialWeights& w, double margin) {
  return stability_check(psi, WeightsSpectrum(w), margin);
}

double temporal_spectral_radius(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& pi, const WeightsSpectrum& ws) {
  if (!ws.has_eigenvalues()) throw NumericError("weight matrix eigenvalues unavailable");
  const Eigen::Index p = psi.rows();
  const Eigen::MatrixXcd psi_t = psi.transpose().cast<std::complex<double>>();
  const Eigen::MatrixXcd pi_t = pi.transpose().cast<std::complex<double>>();
  double rho = 0.0;
  for (Eigen::Index j = 0; j < ws.eigenvalues().size(); ++j) {
    const Eigen::MatrixXcd m =
        (Eigen::MatrixXcd::Identity(p, p) - ws.eigenvalues()[j] * psi_t).partialPivLu().solve(pi_t);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m, false);
    rho = std::max(rho, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  return rho;
}

SpatialFilter::SpatialFilter(const Eigen::MatrixXd& psi, std::shared_ptr<const WeightsSpectrum> ws, double margin)
    : psi_(psi), ws_(std::move(ws)) {
  if (psi_.rows() != psi_.cols()) throw ValidationError("Psi must be square");
  stability_ = stability_check(psi_, *ws_, margin);
  mu_ = psi_eigenvalues_of(psi_);
  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(psi_.transpose().cast<std::complex<double>>());
  if (schur.info() != Eigen::Success) throw NumericError("Schur decomposition of Psi failed");
  schur_t_ = schur.matrixT();
  schur_u_ = schur.matrixU();
}

void SpatialFilter::require_stable() const {
  if (!stability_.stable)
    throw NumericError("spatial filter unstable: max |mu nu| = " + std::to_string(stability_.spectral_product) +
                       " >= 1 - margin");
}

Eigen::MatrixXd SpatialFilter::apply(const Eigen::MatrixXd& y) const {
  if (y.rows() != ws_->size() || y.cols() != psi_.rows())
    throw ValidationError("matrix shape does not match filter");
  return y - ws_->weights().matrix() * (y * psi_);
}

Eigen::MatrixXd SpatialFilter::solve(const Eigen::MatrixXd& r) const {
  if (r.rows() != ws_->size() || r.cols() != psi_.rows())
    throw ValidationError("matrix shape does not match filter");
  require_stable();
  const Eigen::Index n = ws_->size(), p = psi_.rows();

  // Project onto the Schur basis of Psi^T: S = (U kron I)(I - T kron W)(U* kron I).
  Eigen::MatrixXcd c = r.cast<std::complex<double>>() * schur_u_.conjugate();
  Eigen::MatrixXcd z(n, p);

  for (Eigen::Index i = p - 1; i >= 0; --i) {
    Eigen::VectorXcd rhs = c.col(i);
    if (i + 1 < p) {
      Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(n);
      for (Eigen::Index j = i + 1; j < p; ++j) acc += schur_t_(i, j) * z.col(j);
      rhs += ws_->weights().matrix() * acc;
    }
    const std::complex<double> lambda = schur_t_(i, i);
    if (ws_->has_eigenbasis()) {
      Eigen::VectorXcd t = ws_->basis_inverse() * rhs;
      t.array() /= (1.0 - lambda * ws_->eigenvalues().array());
      z.col(i) = ws_->basis() * t;
    } else {
      Eigen::SparseMatrix<std::complex<double>> a =
          ws_->weights().matrix().cast<std::complex<double>>() * (-lambda);
      for (Eigen::Index k = 0; k < n; ++k) a.coeffRef(k, k) += 1.0;
      a.makeCompressed();
      Eigen::SparseLU<Eigen::SparseMatrix<std::complex<double>>> lu(a);
      if (lu.info() != Eigen::Success) throw NumericError("sparse solve of spatial filter failed");
      z.col(i) = lu.solve(rhs);
    }
  }
  Eigen::MatrixXd out = (z * schur_u_.transpose()).real();
  if (!out.allFinite()) throw NumericError("spatial filter solve produced non-finite values");
  return out;
}

double SpatialFilter::log_det() const {
  require_stable();
  double ld = 0.0;
  if (ws_->has_eigenvalues()) {
    for (Eigen::Index i = 0; i < mu_.size(); ++i)
      for (Eigen::Index j = 0; j < ws_->eigenvalues().size(); ++j)
        ld += std::log(std::abs(1.0 - mu_[i] * ws_->eigenvalues()[j]));
  } else {
    // dense fallback: |S| > 0 inside the stability region
    const Eigen::Index n = ws_->size(), p = psi_.rows();
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n * p, n * p);
    const Eigen::MatrixXd wd = ws_->weights().dense();
    for (Eigen::Index bi = 0; bi < p; ++bi)
      for (Eigen::Index bj = 0; bj < p; ++bj) s.block(bi * n, bj * n, n, n) -= psi_(bj, bi) * wd;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(s);
    const Eigen::MatrixXd& u = lu.matrixLU();
    for (Eigen::Index k = 0; k < u.rows(); ++k) ld += std::log(std::abs(u(k, k)));
  }
  if (!std::isfinite(ld)) throw NumericError("log-determinant of spatial filter is not finite");
  return ld;
}

Eigen::MatrixXd regression_term(const Eigen::MatrixXd& b, const std::vector<Eigen::MatrixXd>& xt) {
  if (static_cast<Eigen::Index>(xt.size()) != b.rows())
    throw ValidationError("regressor count does not match B");
  if (xt.empty()) throw ValidationError("regression term needs at least one regressor");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(xt.front().rows(), xt.front().cols());
  for (Eigen::Index i = 0; i < b.rows(); ++i) m += xt[static_cast<std::size_t>(i)] * b.row(i).asDiagonal();
  return m;
}

std::vector<Eigen::MatrixXd> residuals(const ModelParams& params, const PanelData& data, const SpatialWeights& w) {
  params.validate();
  data.validate();
  if (data.p() != params.p()) throw ValidationError("panel and parameters disagree on p");
  if (data.q() != params.q()) throw ValidationError("panel and parameters disagree on q");
  if (w.size() != data.n()) throw ValidationError("weight matrix size does not match panel");

  std::vector<Eigen::MatrixXd> out;
  out.reserve(data.Y.size());
  const Eigen::MatrixXd* prev = &data.Y0;
  for (std::size_t t = 0; t < data.Y.size(); ++t) {
    Eigen::MatrixXd e = data.Y[t] - w.matrix() * (data.Y[t] * params.Psi) - *prev * params.Pi;
    if (params.q() > 0) e -= regression_term(params.B, data.X[t]);
    out.push_back(std::move(e));
    prev = &data.Y[t];
  }
  return out;
}

}  // namespace cstar
