#include "cstar/estimate.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace cstar {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stacked panel quantities reused by every likelihood evaluation during one
// fit. Columns of the least-squares design do not depend on Psi, so the QR
// factorizations are computed once.
struct Context {
  std::shared_ptr<const WeightsSpectrum> ws;
  Eigen::Index n = 0, p = 0, T = 0, q = 0;
  bool fix_pi_zero = false;
  double margin = 1e-4;

  Eigen::MatrixXd ystack;     // nT x p
  Eigen::MatrixXd wystack;    // nT x p
  Eigen::MatrixXd ylagstack;  // nT x p
  std::vector<Eigen::MatrixXd> xstack;  // per component j: nT x q
  std::vector<Eigen::MatrixXd> design;  // per component j: nT x (q + lag cols)
  std::vector<Eigen::ColPivHouseholderQR<Eigen::MatrixXd>> qr;

  Eigen::Index nobs() const { return n * p * T; }

  static Context build(const PanelData& data, std::shared_ptr<const WeightsSpectrum> ws, bool fix_pi_zero,
                       double margin) {
    data.validate();
    if (ws->size() != data.n()) throw ValidationError("weight matrix size does not match panel");
    Context c;
    c.ws = std::move(ws);
    c.n = data.n();
    c.p = data.p();
    c.T = data.T();
    c.q = data.q();
    c.fix_pi_zero = fix_pi_zero;
    c.margin = margin;

    c.ystack.resize(c.n * c.T, c.p);
    c.wystack.resize(c.n * c.T, c.p);
    c.ylagstack.resize(c.n * c.T, c.p);
    const Eigen::MatrixXd* prev = &data.Y0;
    for (Eigen::Index t = 0; t < c.T; ++t) {
      const auto& yt = data.Y[static_cast<std::size_t>(t)];
      c.ystack.middleRows(t * c.n, c.n) = yt;
      c.wystack.middleRows(t * c.n, c.n) = c.ws->weights().matrix() * yt;
      c.ylagstack.middleRows(t * c.n, c.n) = *prev;
      prev = &yt;
    }

    const Eigen::Index lag_cols = fix_pi_zero ? 0 : c.p;
    for (Eigen::Index j = 0; j < c.p; ++j) {
      Eigen::MatrixXd xs(c.n * c.T, c.q);
      for (Eigen::Index t = 0; t < c.T; ++t)
        for (Eigen::Index i = 0; i < c.q; ++i)
          xs.block(t * c.n, i, c.n, 1) =
              data.X[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)].col(j);
      Eigen::MatrixXd d(c.n * c.T, c.q + lag_cols);
      if (c.q > 0) d.leftCols(c.q) = xs;
      if (lag_cols > 0) d.rightCols(lag_cols) = c.ylagstack;
      c.xstack.push_back(std::move(xs));
      if (d.cols() > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> f(d);
        if (f.rank() < d.cols())
          throw NumericError("singular design: stacked regressor matrix for component " +
                             std::to_string(j + 1) + " is rank-deficient");
        c.qr.push_back(std::move(f));
      } else {
        c.qr.emplace_back();
      }
      c.design.push_back(std::move(d));
    }
    return c;
  }

  bool stable(const Eigen::MatrixXd& psi) const {
    Eigen::EigenSolver<Eigen::MatrixXd> es(psi, false);
    if (es.info() != Eigen::Success) return false;
    const double rho_psi = es.eigenvalues().cwiseAbs().maxCoeff();
    const double rho_w = ws->has_eigenvalues() ? ws->spectral_radius() : ws->weights().norm_inf();
    return rho_psi * rho_w < 1.0 - margin;
  }

  double log_det(const Eigen::MatrixXd& psi) const {
    Eigen::EigenSolver<Eigen::MatrixXd> es(psi, false);
    if (es.info() != Eigen::Success) throw NumericError("eigenvalue computation for Psi failed");
    double ld = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      for (Eigen::Index j = 0; j < ws->eigenvalues().size(); ++j)
        ld += std::log(std::abs(1.0 - es.eigenvalues()[i] * ws->eigenvalues()[j]));
    return ld;
  }

  // Profile (B, Pi, sigma2) out of the likelihood for a given Psi.
  // Returns false when Psi lies outside the stability region.
  bool profile(const Eigen::MatrixXd& psi, ProfiledFit& out) const {
    if (!stable(psi)) return false;
    const Eigen::Index lag_cols = fix_pi_zero ? 0 : p;
    out.B.resize(q, p);
    out.Pi = Eigen::MatrixXd::Zero(p, p);
    double rss = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      Eigen::VectorXd resp = ystack.col(j) - wystack * psi.col(j);
      if (design[static_cast<std::size_t>(j)].cols() > 0) {
        Eigen::VectorXd coef = qr[static_cast<std::size_t>(j)].solve(resp);
        rss += (resp - design[static_cast<std::size_t>(j)] * coef).squaredNorm();
        for (Eigen::Index i = 0; i < q; ++i) out.B(i, j) = coef[i];
        for (Eigen::Index k = 0; k < lag_cols; ++k) out.Pi(k, j) = coef[q + k];
      } else {
        rss += resp.squaredNorm();
      }
    }
    const double nobs_d = static_cast<double>(nobs());
    out.sigma2 = rss / nobs_d;
    const double s2 = std::max(out.sigma2, 1e-300);
    out.loglik = -0.5 * nobs_d * (std::log(kTwoPi * s2) + 1.0) + static_cast<double>(T) * log_det(psi);
    return true;
  }

  // Full log-likelihood at explicit parameters; -inf outside the stability
  // region, NaN-free otherwise.
  double full_ll(const Eigen::MatrixXd& b, const Eigen::MatrixXd& psi, const Eigen::MatrixXd& pi,
                 double sigma2) const {
    if (!(sigma2 > 0.0)) return -kInf;
    if (!stable(psi)) return -kInf;
    double rss = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      Eigen::VectorXd e = ystack.col(j) - wystack * psi.col(j) - ylagstack * pi.col(j);
      if (q > 0) e -= xstack[static_cast<std::size_t>(j)] * b.col(j);
      rss += e.squaredNorm();
    }
    const double nobs_d = static_cast<double>(nobs());
    return -0.5 * nobs_d * std::log(kTwoPi * sigma2) + static_cast<double>(T) * log_det(psi) -
           rss / (2.0 * sigma2);
  }
};

// ---------------------------------------------------------------------------
// derivative-free helpers

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double rel = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double h = rel * std::max(1.0, std::abs(x[i]));
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    double fp = f(xp), fm = f(xm);
    int shrink = 0;
    while ((!std::isfinite(fp) || !std::isfinite(fm)) && shrink < 8) {
      h *= 0.25;
      xp[i] = x[i] + h;
      xm[i] = x[i] - h;
      fp = f(xp);
      fm = f(xm);
      ++shrink;
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

struct OptimResult {
  Eigen::VectorXd x;
  double f = kInf;
  bool converged = false;
  int iterations = 0;
};

// BFGS minimization with numerical gradients; infeasible points return +inf
// and are rejected by the backtracking line search (step halving).
OptimResult bfgs_minimize(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                          int max_iter, double grad_tol) {
  const Eigen::Index k = x0.size();
  OptimResult res;
  res.x = std::move(x0);
  res.f = f(res.x);
  if (!std::isfinite(res.f)) throw NumericError("optimizer started at an infeasible point");

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(k, k);
  Eigen::VectorXd g = numeric_gradient(f, res.x);

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    if (g.cwiseAbs().maxCoeff() < grad_tol) {
      res.converged = true;
      return res;
    }
    Eigen::VectorXd d = -h_inv * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {  // fallback to steepest descent
      h_inv.setIdentity();
      d = -g;
      slope = g.dot(d);
    }
    double alpha = 1.0;
    double f_new = kInf;
    Eigen::VectorXd x_new;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = res.x + alpha * d;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * alpha * slope) {
        ok = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!ok) return res;  // stalled; converged stays false unless grad small
    Eigen::VectorXd g_new = numeric_gradient(f, x_new);
    Eigen::VectorXd s = x_new - res.x;
    Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      Eigen::MatrixXd left = Eigen::MatrixXd::Identity(k, k) - rho * s * yv.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }
    res.x = std::move(x_new);
    res.f = f_new;
    g = std::move(g_new);
  }
  g = numeric_gradient(f, res.x);
  res.converged = g.cwiseAbs().maxCoeff() < grad_tol;
  return res;
}

// Nelder-Mead minimization; infeasible points carry +inf and the simplex
// contracts away from them.
OptimResult nelder_mead_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x0, int max_iter, double grad_tol) {
  const Eigen::Index k = x0.size();
  const int n_vert = static_cast<int>(k) + 1;
  std::vector<Eigen::VectorXd> xs(static_cast<std::size_t>(n_vert), x0);
  std::vector<double> fs(static_cast<std::size_t>(n_vert));
  for (int i = 1; i < n_vert; ++i) xs[static_cast<std::size_t>(i)][i - 1] += 0.05 * std::max(1.0, std::abs(x0[i - 1]));
  for (int i = 0; i < n_vert; ++i) fs[static_cast<std::size_t>(i)] = f(xs[static_cast<std::size_t>(i)]);

  auto order = [&] {
    std::vector<int> idx(static_cast<std::size_t>(n_vert));
    for (int i = 0; i < n_vert; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return fs[static_cast<std::size_t>(a)] < fs[static_cast<std::size_t>(b)];
    });
    std::vector<Eigen::VectorXd> xs2;
    std::vector<double> fs2;
    for (int i : idx) {
      xs2.push_back(xs[static_cast<std::size_t>(i)]);
      fs2.push_back(fs[static_cast<std::size_t>(i)]);
    }
    xs = std::move(xs2);
    fs = std::move(fs2);
  };

  OptimResult res;
  const int cap = std::max(max_iter, 200 * static_cast<int>(k));
  for (res.iterations = 0; res.iterations < cap; ++res.iterations) {
    order();
    if (std::isfinite(fs.back()) &&
        fs.back() - fs.front() < 1e-12 * (1.0 + std::abs(fs.front()))) {
      double spread = 0.0;
      for (int i = 1; i < n_vert; ++i)
        spread = std::max(spread, (xs[static_cast<std::size_t>(i)] - xs[0]).cwiseAbs().maxCoeff());
      if (spread < 1e-8) break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(k);
    for (int i = 0; i + 1 < n_vert; ++i) centroid += xs[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(n_vert - 1);

    Eigen::VectorXd xr = centroid + (centroid - xs.back());
    double fr = f(xr);
    if (fr < fs.front()) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs.back());
      double fe = f(xe);
      if (fe < fr) {
        xs.back() = xe;
        fs.back() = fe;
      } else {
        xs.back() = xr;
        fs.back() = fr;
      }
    } else if (fr < fs[static_cast<std::size_t>(n_vert - 2)]) {
      xs.back() = xr;
      fs.back() = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (xs.back() - centroid);
      double fc = f(xc);
      if (fc < fs.back()) {
        xs.back() = xc;
        fs.back() = fc;
      } else {
        for (int i = 1; i < n_vert; ++i) {
          xs[static_cast<std::size_t>(i)] = xs[0] + 0.5 * (xs[static_cast<std::size_t>(i)] - xs[0]);
          fs[static_cast<std::size_t>(i)] = f(xs[static_cast<std::size_t>(i)]);
        }
      }
    }
  }
  order();
  res.x = xs.front();
  res.f = fs.front();
  Eigen::VectorXd g = numeric_gradient(f, res.x);
  res.converged = g.cwiseAbs().maxCoeff() < grad_tol;
  return res;
}

}  // namespace

void FitOptions::validate() const {
  if (max_iterations < 1) throw ValidationError("max_iterations must be >= 1");
  if (!(gradient_tolerance > 0.0)) throw ValidationError("gradient_tolerance must be > 0");
  if (!(stability_margin > 0.0)) throw ValidationError("stability_margin must be > 0");
  if (!(hessian_step > 0.0)) throw ValidationError("hessian_step must be > 0");
}

std::vector<std::string> parameter_names(Eigen::Index q, Eigen::Index p, bool first_regressor_is_intercept) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < q; ++i) {
      const Eigen::Index disp = first_regressor_is_intercept ? i : i + 1;
      names.push_back("beta_" + std::to_string(disp) + "_" + std::to_string(j + 1));
    }
  for (Eigen::Index k = 0; k < p; ++k)
    for (Eigen::Index j = 0; j < p; ++j)
      names.push_back("psi_" + std::to_string(j + 1) + "_" + std::to_string(k + 1));
  for (Eigen::Index k = 0; k < p; ++k)
    for (Eigen::Index j = 0; j < p; ++j)
      names.push_back("pi_" + std::to_string(j + 1) + "_" + std::to_string(k + 1));
  names.push_back("sigma_eps");
  return names;
}

double loglik(const ModelParams& params, const PanelData& data, std::shared_ptr<const WeightsSpectrum> ws) {
  params.validate();
  if (!(params.sigma2 > 0.0)) throw ValidationError("loglik requires sigma2 > 0");
  Context c = Context::build(data, std::move(ws), false, 0.0);
  if (params.p() != c.p || params.q() != c.q) throw ValidationError("panel and parameters disagree on shape");
  Eigen::MatrixXd b = params.B.size() > 0 ? params.B : Eigen::MatrixXd::Zero(0, c.p);
  const double ll = c.full_ll(b, params.Psi, params.Pi, params.sigma2);
  if (!std::isfinite(ll))
    throw NumericError("log-likelihood is not finite (parameters outside the stability region?)");
  return ll;
}

double loglik(const ModelParams& params, const PanelData& data, const SpatialWeights& w) {
  return loglik(params, data, std::make_shared<WeightsSpectrum>(w));
}

double loglik_paper_form(const ModelParams& params, const PanelData& data, const SpatialWeights& w) {
  // Verbatim transcription of the printed objective; diagnostics only.
  params.validate();
  if (!(params.sigma2 > 0.0)) throw ValidationError("loglik requires sigma2 > 0");
  auto ws = std::make_shared<WeightsSpectrum>(w);
  Context c = Context::build(data, ws, false, 0.0);
  const double p_d = static_cast<double>(c.p);
  const double t_d = static_cast<double>(c.T);
  const double n_d = static_cast<double>(c.n);
  double rss = 0.0;
  for (Eigen::Index j = 0; j < c.p; ++j) {
    Eigen::VectorXd e = c.ystack.col(j) - c.wystack * params.Psi.col(j) - c.ylagstack * params.Pi.col(j);
    if (c.q > 0) e -= c.xstack[static_cast<std::size_t>(j)] * params.B.col(j);
    rss += e.squaredNorm();
  }
  return -0.5 * t_d * n_d * p_d * std::log(kTwoPi) + t_d * n_d * std::log(params.sigma2) / (2.0 * p_d) +
         t_d / p_d * c.log_det(params.Psi) - rss / (2.0 * p_d * params.sigma2);
}

ProfiledFit concentrated_loglik(const Eigen::MatrixXd& psi, const PanelData& data, const SpatialWeights& w,
                                bool fix_pi_zero, double stability_margin) {
  Context c = Context::build(data, std::make_shared<WeightsSpectrum>(w), fix_pi_zero, stability_margin);
  if (psi.rows() != c.p || psi.cols() != c.p) throw ValidationError("Psi shape does not match panel");
  ProfiledFit out;
  if (!c.profile(psi, out))
    throw NumericError("Psi outside the stability region (margin " + std::to_string(stability_margin) + ")");
  return out;
}

namespace {

FitResult finalize_fit(const Context& c, const ModelParams& params, double ll, bool converged, int iterations,
                       const FitOptions& opts) {
  FitResult res;
  res.params = params;
  res.loglik = ll;
  res.converged = converged;
  res.iterations = iterations;

  const Eigen::Index nb = c.q * c.p, np2 = c.p * c.p;
  const Eigen::Index dim = nb + 2 * np2 + 1;
  const double sigma_eps = std::sqrt(std::max(params.sigma2, 0.0));

  res.estimates.resize(dim);
  for (Eigen::Index j = 0; j < c.p; ++j)
    for (Eigen::Index i = 0; i < c.q; ++i) res.estimates[beta_index(c.q, c.p, i, j)] = params.B(i, j);
  for (Eigen::Index k = 0; k < c.p; ++k)
    for (Eigen::Index j = 0; j < c.p; ++j) {
      res.estimates[psi_index(c.q, c.p, j, k)] = params.Psi(j, k);
      res.estimates[pi_index(c.q, c.p, j, k)] = params.Pi(j, k);
    }
  res.estimates[sigma_index(c.q, c.p)] = sigma_eps;

  res.std_errors = Eigen::VectorXd::Constant(dim, kNaN);
  res.t_stats = Eigen::VectorXd::Constant(dim, kNaN);
  res.vcov = Eigen::MatrixXd::Zero(dim, dim);

  if (!opts.compute_std_errors) return res;
  if (!(params.sigma2 > 1e-290)) return res;  // noiseless fit, curvature in sigma undefined

  // free coordinates of the extended vector
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index i = 0; i < nb; ++i) free_idx.push_back(i);
  if (!opts.fix_psi_zero)
    for (Eigen::Index i = 0; i < np2; ++i) free_idx.push_back(nb + i);
  if (!opts.fix_pi_zero)
    for (Eigen::Index i = 0; i < np2; ++i) free_idx.push_back(nb + np2 + i);
  free_idx.push_back(nb + 2 * np2);
  const Eigen::Index kf = static_cast<Eigen::Index>(free_idx.size());

  auto ll_ext = [&](const Eigen::VectorXd& th_free) -> double {
    Eigen::VectorXd th = res.estimates;
    for (Eigen::Index i = 0; i < kf; ++i) th[free_idx[static_cast<std::size_t>(i)]] = th_free[i];
    Eigen::MatrixXd b(c.q, c.p), psi(c.p, c.p), pi(c.p, c.p);
    for (Eigen::Index j = 0; j < c.p; ++j)
      for (Eigen::Index i = 0; i < c.q; ++i) b(i, j) = th[beta_index(c.q, c.p, i, j)];
    for (Eigen::Index k = 0; k < c.p; ++k)
      for (Eigen::Index j = 0; j < c.p; ++j) {
        psi(j, k) = th[psi_index(c.q, c.p, j, k)];
        pi(j, k) = th[pi_index(c.q, c.p, j, k)];
      }
    const double sig = th[sigma_index(c.q, c.p)];
    return c.full_ll(b, psi, pi, sig * sig);
  };

  Eigen::VectorXd th0(kf);
  for (Eigen::Index i = 0; i < kf; ++i) th0[i] = res.estimates[free_idx[static_cast<std::size_t>(i)]];

  // central-difference Hessian; steps shrink when an evaluation leaves the
  // feasible region
  Eigen::VectorXd h(kf);
  for (Eigen::Index i = 0; i < kf; ++i) h[i] = opts.hessian_step * std::max(1.0, std::abs(th0[i]));
  h[kf - 1] = std::min(h[kf - 1], 0.5 * sigma_eps);

  const double f0 = ll_ext(th0);
  Eigen::MatrixXd hess(kf, kf);
  auto eval_pair = [&](Eigen::Index i, Eigen::Index j) -> double {
    for (int attempt = 0; attempt < 6; ++attempt) {
      if (i == j) {
        Eigen::VectorXd xp = th0, xm = th0;
        xp[i] += h[i];
        xm[i] -= h[i];
        const double fp = ll_ext(xp), fm = ll_ext(xm);
        if (std::isfinite(fp) && std::isfinite(fm)) return (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
      } else {
        Eigen::VectorXd a = th0, b2 = th0, c2 = th0, d2 = th0;
        a[i] += h[i]; a[j] += h[j];
        b2[i] += h[i]; b2[j] -= h[j];
        c2[i] -= h[i]; c2[j] += h[j];
        d2[i] -= h[i]; d2[j] -= h[j];
        const double fa = ll_ext(a), fb = ll_ext(b2), fc = ll_ext(c2), fd = ll_ext(d2);
        if (std::isfinite(fa) && std::isfinite(fb) && std::isfinite(fc) && std::isfinite(fd))
          return (fa - fb - fc + fd) / (4.0 * h[i] * h[j]);
      }
      h[i] *= 0.25;
      if (i != j) h[j] *= 0.25;
    }
    throw NumericError("Hessian evaluation kept leaving the feasible region");
  };
  for (Eigen::Index i = 0; i < kf; ++i)
    for (Eigen::Index j = i; j < kf; ++j) hess(i, j) = hess(j, i) = eval_pair(i, j);

  Eigen::MatrixXd neg_h = -hess;
  Eigen::MatrixXd vcov_free;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(neg_h);
  if (lu.isInvertible()) {
    vcov_free = lu.inverse();
    vcov_free = 0.5 * (vcov_free + vcov_free.transpose()).eval();
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(neg_h, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double tol = 1e-12 * svd.singularValues().maxCoeff() * static_cast<double>(kf);
    Eigen::VectorXd inv_s = svd.singularValues();
    for (Eigen::Index i = 0; i < inv_s.size(); ++i) inv_s[i] = inv_s[i] > tol ? 1.0 / inv_s[i] : 0.0;
    vcov_free = svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose();
    res.hessian_pseudo_inverse = true;
  }

  for (Eigen::Index i = 0; i < kf; ++i)
    for (Eigen::Index j = 0; j < kf; ++j)
      res.vcov(free_idx[static_cast<std::size_t>(i)], free_idx[static_cast<std::size_t>(j)]) = vcov_free(i, j);
  for (Eigen::Index i = 0; i < kf; ++i) {
    const Eigen::Index gi = free_idx[static_cast<std::size_t>(i)];
    const double v = vcov_free(i, i);
    if (v >= 0.0) {
      res.std_errors[gi] = std::sqrt(v);
    } else {
      res.non_concave.push_back(gi);  // se stays NaN
    }
  }
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double se = res.std_errors[i];
    if (std::isfinite(se) && se > 0.0) res.t_stats[i] = res.estimates[i] / se;
  }
  return res;
}

}  // namespace

FitResult fit(const PanelData& data, const SpatialWeights& w, const FitOptions& opts) {
  opts.validate();
  if (data.T() < 2) throw ValidationError("fit needs at least two time points after Y_0");
  auto ws = std::make_shared<WeightsSpectrum>(w);
  Context c = Context::build(data, ws, opts.fix_pi_zero, opts.stability_margin);
  const double nobs_d = static_cast<double>(c.nobs());

  auto run = [&](const std::function<double(const Eigen::VectorXd&)>& obj, const Eigen::VectorXd& x0) {
    return opts.optimizer == Optimizer::quasi_newton_numeric_gradient
               ? bfgs_minimize(obj, x0, opts.max_iterations, opts.gradient_tolerance)
               : nelder_mead_minimize(obj, x0, opts.max_iterations, opts.gradient_tolerance);
  };

  ModelParams est;
  double ll_final = 0.0;
  bool converged = false;
  int iterations = 0;

  if (opts.fix_psi_zero) {
    ProfiledFit pf;
    if (!c.profile(Eigen::MatrixXd::Zero(c.p, c.p), pf)) throw NumericError("Psi = 0 rejected by stability check");
    est = ModelParams{pf.B, Eigen::MatrixXd::Zero(c.p, c.p), pf.Pi, pf.sigma2};
    ll_final = pf.loglik;
    converged = true;
  } else if (opts.concentrate) {
    ProfiledFit pf;
    auto obj = [&](const Eigen::VectorXd& x) -> double {
      Eigen::MatrixXd psi = Eigen::Map<const Eigen::MatrixXd>(x.data(), c.p, c.p);
      ProfiledFit local;
      if (!c.profile(psi, local)) return kInf;
      return -local.loglik / nobs_d;
    };
    OptimResult opt = run(obj, Eigen::VectorXd::Zero(c.p * c.p));
    Eigen::MatrixXd psi_hat = Eigen::Map<const Eigen::MatrixXd>(opt.x.data(), c.p, c.p);
    if (!c.profile(psi_hat, pf)) throw NumericError("optimizer returned an unstable Psi");
    est = ModelParams{pf.B, psi_hat, pf.Pi, pf.sigma2};
    ll_final = pf.loglik;
    converged = opt.converged;
    iterations = opt.iterations;
  } else {
    // joint optimization over (vec B, vec Psi, vec Pi) with sigma2 profiled
    const Eigen::Index nb = c.q * c.p, np2 = c.p * c.p;
    const Eigen::Index k = nb + np2 + (opts.fix_pi_zero ? 0 : np2);
    auto unpack = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& b, Eigen::MatrixXd& psi, Eigen::MatrixXd& pi) {
      b = Eigen::Map<const Eigen::MatrixXd>(x.data(), c.q, c.p);
      psi = Eigen::Map<const Eigen::MatrixXd>(x.data() + nb, c.p, c.p);
      if (opts.fix_pi_zero)
        pi = Eigen::MatrixXd::Zero(c.p, c.p);
      else
        pi = Eigen::Map<const Eigen::MatrixXd>(x.data() + nb + np2, c.p, c.p);
    };
    auto obj = [&](const Eigen::VectorXd& x) -> double {
      Eigen::MatrixXd b, psi, pi;
      unpack(x, b, psi, pi);
      if (!c.stable(psi)) return kInf;
      double rss = 0.0;
      for (Eigen::Index j = 0; j < c.p; ++j) {
        Eigen::VectorXd e = c.ystack.col(j) - c.wystack * psi.col(j) - c.ylagstack * pi.col(j);
        if (c.q > 0) e -= c.xstack[static_cast<std::size_t>(j)] * b.col(j);
        rss += e.squaredNorm();
      }
      const double s2 = std::max(rss / nobs_d, 1e-300);
      const double ll = -0.5 * nobs_d * (std::log(kTwoPi * s2) + 1.0) +
                        static_cast<double>(c.T) * c.log_det(psi);
      return -ll / nobs_d;
    };
    // warm start from the profile at Psi = 0 (plain least squares)
    ProfiledFit pf0;
    if (!c.profile(Eigen::MatrixXd::Zero(c.p, c.p), pf0)) throw NumericError("Psi = 0 rejected by stability check");
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(k);
    Eigen::Map<Eigen::MatrixXd>(x0.data(), c.q, c.p) = pf0.B;
    if (!opts.fix_pi_zero) Eigen::Map<Eigen::MatrixXd>(x0.data() + nb + np2, c.p, c.p) = pf0.Pi;
    OptimResult opt = run(obj, x0);
    Eigen::MatrixXd b, psi, pi;
    unpack(opt.x, b, psi, pi);
    double rss = 0.0;
    for (Eigen::Index j = 0; j < c.p; ++j) {
      Eigen::VectorXd e = c.ystack.col(j) - c.wystack * psi.col(j) - c.ylagstack * pi.col(j);
      if (c.q > 0) e -= c.xstack[static_cast<std::size_t>(j)] * b.col(j);
      rss += e.squaredNorm();
    }
    est = ModelParams{b, psi, pi, rss / nobs_d};
    const double s2 = std::max(est.sigma2, 1e-300);
    ll_final = -0.5 * nobs_d * (std::log(kTwoPi * s2) + 1.0) + static_cast<double>(c.T) * c.log_det(psi);
    converged = opt.converged;
    iterations = opt.iterations;
  }

  return finalize_fit(c, est, ll_final, converged, iterations, opts);
}

}  // namespace cstar
