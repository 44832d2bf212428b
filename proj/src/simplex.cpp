#include "cstar/simplex.hpp"

#include <cmath>
#include <vector>

namespace cstar {

namespace {

void check_same_shape(const Composition& x, const Composition& y) {
  if (x.dim() != y.dim()) throw ValidationError("dimension mismatch between compositions");
  if (std::abs(x.kappa() - y.kappa()) > 1e-10 * std::max(1.0, std::abs(x.kappa())))
    throw ValidationError("closure constants differ between compositions");
}

}  // namespace

Composition::Composition(const Eigen::VectorXd& parts, double kappa) {
  if (parts.size() < 2) throw ValidationError("composition needs at least 2 parts");
  if (!(kappa > 0.0)) throw ValidationError("closure constant must be positive");
  if (!parts.allFinite()) throw ValidationError("composition parts must be finite");
  for (Eigen::Index i = 0; i < parts.size(); ++i)
    if (!(parts[i] > 0.0)) throw ValidationError("part " + std::to_string(i) + " is not strictly positive");
  const double sum = parts.sum();
  if (std::abs(sum - kappa) > 1e-10 * std::abs(kappa))
    throw ValidationError("parts sum to " + std::to_string(sum) + ", expected " + std::to_string(kappa));
  shares_ = parts / sum;
  kappa_ = kappa;
}

Composition Composition::neutral(Eigen::Index dim, double kappa) {
  if (dim < 2) throw ValidationError("composition needs at least 2 parts");
  return closure(Eigen::VectorXd::Ones(dim), kappa);
}

Composition closure(const Eigen::VectorXd& v, double kappa) {
  if (v.size() < 2) throw ValidationError("composition needs at least 2 parts");
  if (!(kappa > 0.0)) throw ValidationError("closure constant must be positive");
  if (!v.allFinite()) throw ValidationError("closure input must be finite");
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!(v[i] > 0.0)) throw ValidationError("part " + std::to_string(i) + " is not strictly positive");
  return Composition(v / v.sum(), kappa, Composition::Closed{});
}

Composition closure_replacing_zeros(const Eigen::VectorXd& v, double kappa, double delta, int* replaced) {
  if (!(delta > 0.0)) throw ValidationError("zero replacement delta must be positive");
  Eigen::VectorXd w = v;
  int count = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) {
      w[i] = delta;
      ++count;
    } else if (w[i] < 0.0) {
      throw ValidationError("part " + std::to_string(i) + " is negative");
    }
  }
  if (replaced) *replaced = count;
  return closure(w, kappa);
}

Composition perturb(const Composition& x, const Composition& y) {
  check_same_shape(x, y);
  return closure(x.shares().cwiseProduct(y.shares()), x.kappa());
}

Composition power(double xi, const Composition& x) {
  if (!std::isfinite(xi)) throw ValidationError("powering scalar must be finite");
  // work on log scale so extreme xi cannot overflow before closure
  Eigen::VectorXd logp = xi * x.shares().array().log().matrix();
  const double m = logp.maxCoeff();
  return closure((logp.array() - m).exp().matrix(), x.kappa());
}

double aitchison_inner(const Composition& x, const Composition& y) {
  check_same_shape(x, y);
  return clr(x).dot(clr(y));
}

double aitchison_dist(const Composition& x, const Composition& y) {
  check_same_shape(x, y);
  return (clr(x) - clr(y)).norm();
}

Eigen::VectorXd clr(const Composition& x) {
  Eigen::VectorXd logp = x.shares().array().log().matrix();
  return logp.array() - logp.mean();
}

namespace {

Eigen::MatrixXd helmert_contrast(Eigen::Index d) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d - 1, d);
  for (Eigen::Index k = 1; k < d; ++k) {
    const double s = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    for (Eigen::Index j = 0; j < k; ++j) v(k - 1, j) = s;
    v(k - 1, k) = -s * static_cast<double>(k);
  }
  return v;
}

Eigen::MatrixXd pivot_contrast(Eigen::Index d) {
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d - 1, d);
  for (Eigen::Index k = 0; k + 1 < d; ++k) {
    const double r = static_cast<double>(d - k - 1);
    const double s = std::sqrt(r / (r + 1.0));
    v(k, k) = s;
    for (Eigen::Index j = k + 1; j < d; ++j) v(k, j) = -s / r;
  }
  return v;
}

// Default sequential binary partition: recursively split the (ordered) part
// range into halves as equal as possible.
void balanced_partition_rows(Eigen::Index lo, Eigen::Index hi, Eigen::MatrixXi& sbp, Eigen::Index& row) {
  if (hi - lo < 2) return;
  const Eigen::Index mid = lo + (hi - lo + 1) / 2;
  const Eigen::Index r = row++;
  for (Eigen::Index j = lo; j < mid; ++j) sbp(r, j) = 1;
  for (Eigen::Index j = mid; j < hi; ++j) sbp(r, j) = -1;
  balanced_partition_rows(lo, mid, sbp, row);
  balanced_partition_rows(mid, hi, sbp, row);
}

Eigen::MatrixXd balance_contrast(Eigen::Index d, const Eigen::MatrixXi& sbp) {
  if (sbp.rows() != d - 1 || sbp.cols() != d)
    throw ValidationError("partition sign matrix must be (D-1) x D");

  // Validate that the rows form a sequential binary partition: every row must
  // split exactly one pending group, starting from {1..D}, until all groups
  // are singletons.
  std::vector<std::vector<Eigen::Index>> groups;
  {
    std::vector<Eigen::Index> all(d);
    for (Eigen::Index j = 0; j < d; ++j) all[j] = j;
    groups.push_back(all);
  }
  std::vector<bool> used(static_cast<std::size_t>(d - 1), false);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d - 1, d);

  for (Eigen::Index step = 0; step < d - 1; ++step) {
    bool matched = false;
    for (Eigen::Index r = 0; r < d - 1 && !matched; ++r) {
      if (used[static_cast<std::size_t>(r)]) continue;
      std::vector<Eigen::Index> plus, minus;
      for (Eigen::Index j = 0; j < d; ++j) {
        if (sbp(r, j) > 0)
          plus.push_back(j);
        else if (sbp(r, j) < 0)
          minus.push_back(j);
      }
      if (plus.empty() || minus.empty())
        throw ValidationError("partition row " + std::to_string(r) + " does not bipartition a group");
      std::vector<Eigen::Index> support = plus;
      support.insert(support.end(), minus.begin(), minus.end());
      std::sort(support.begin(), support.end());
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g] == support) {
          const double np = static_cast<double>(plus.size());
          const double nm = static_cast<double>(minus.size());
          const double cp = std::sqrt(nm / (np * (np + nm)));
          const double cm = -std::sqrt(np / (nm * (np + nm)));
          for (Eigen::Index j : plus) v(r, j) = cp;
          for (Eigen::Index j : minus) v(r, j) = cm;
          groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(g));
          if (plus.size() > 1) groups.push_back(plus);
          if (minus.size() > 1) groups.push_back(minus);
          for (auto& grp : groups) std::sort(grp.begin(), grp.end());
          used[static_cast<std::size_t>(r)] = true;
          matched = true;
          break;
        }
      }
    }
    if (!matched) throw ValidationError("partition rows do not form a sequential binary partition");
  }
  return v;
}

}  // namespace

IlrBasis build_basis(Eigen::Index dim, BasisMode mode, const std::optional<Eigen::MatrixXi>& partition) {
  if (dim < 2) throw ValidationError("basis needs D >= 2");
  if (mode != BasisMode::balance && partition.has_value())
    throw ValidationError("partition is only meaningful for balance mode");
  Eigen::MatrixXd contrast;
  switch (mode) {
    case BasisMode::helmert:
      contrast = helmert_contrast(dim);
      break;
    case BasisMode::pivot:
      contrast = pivot_contrast(dim);
      break;
    case BasisMode::balance: {
      Eigen::MatrixXi sbp;
      if (partition.has_value()) {
        sbp = *partition;
      } else {
        sbp = Eigen::MatrixXi::Zero(dim - 1, dim);
        Eigen::Index row = 0;
        balanced_partition_rows(0, dim, sbp, row);
      }
      contrast = balance_contrast(dim, sbp);
      break;
    }
  }
  return IlrBasis(std::move(contrast), mode);
}

Eigen::VectorXd ilr(const Composition& x, const IlrBasis& basis) {
  if (basis.dim() != x.dim()) throw ValidationError("basis dimension does not match composition");
  return basis.contrast() * clr(x);
}

Composition ilr_inv(const Eigen::VectorXd& y, const IlrBasis& basis, double kappa) {
  if (y.size() != basis.coord_dim()) throw ValidationError("coordinate vector does not match basis");
  if (!y.allFinite()) throw ValidationError("coordinates must be finite");
  Eigen::VectorXd z = basis.contrast().transpose() * y;
  // shift before exponentiating so the largest part is exactly 1
  const double m = z.maxCoeff();
  return closure((z.array() - m).exp().matrix(), kappa);
}

}  // namespace cstar
