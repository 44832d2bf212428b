#pragma once

#include <Eigen/Dense>
#include <optional>

#include "cstar/common.hpp"

namespace cstar {

/// A strictly positive D-part vector summing to a closure constant kappa.
///
/// Internally the parts are stored as shares summing to 1; kappa is kept for
/// display only, since every log-ratio quantity is invariant to it.
class Composition {
 public:
  /// Validates positivity, D >= 2 and the sum-to-kappa constraint
  /// (relative tolerance 1e-10).
  Composition(const Eigen::VectorXd& parts, double kappa = 1.0);

  Eigen::Index dim() const { return shares_.size(); }
  double kappa() const { return kappa_; }
  const Eigen::VectorXd& shares() const { return shares_; }
  Eigen::VectorXd parts() const { return kappa_ * shares_; }

  /// All parts equal; the identity of the perturbation group.
  static Composition neutral(Eigen::Index dim, double kappa = 1.0);

 private:
  struct Closed {};
  Composition(Eigen::VectorXd shares, double kappa, Closed) : shares_(std::move(shares)), kappa_(kappa) {}

  Eigen::VectorXd shares_;
  double kappa_;

  friend Composition closure(const Eigen::VectorXd&, double);
};

/// Rescale a strictly positive vector so its parts sum to kappa.
Composition closure(const Eigen::VectorXd& v, double kappa = 1.0);

/// closure() after replacing zero entries by delta * kappa; negative entries
/// still reject. replaced, if given, receives the number of substitutions.
Composition closure_replacing_zeros(const Eigen::VectorXd& v, double kappa = 1.0, double delta = 1e-6,
                                    int* replaced = nullptr);

/// Group operation of Aitchison geometry: closure of the elementwise product.
Composition perturb(const Composition& x, const Composition& y);

/// Scalar powering: closure of elementwise xi-th powers.
Composition power(double xi, const Composition& x);

/// (1/2D) sum_{l,k} log(x_l/x_k) log(y_l/y_k).
double aitchison_inner(const Composition& x, const Composition& y);

/// Norm of x (-) y; coincides with the Euclidean distance of ilr coordinates.
double aitchison_dist(const Composition& x, const Composition& y);

/// Centred log-ratio: log parts relative to their geometric mean; sums to 0.
Eigen::VectorXd clr(const Composition& x);

enum class BasisMode { helmert, balance, pivot };

/// Orthonormal ilr coordinate system given by a (D-1) x D contrast matrix V
/// with V V^T = I and V^T V = I - (1/D) 11^T.
class IlrBasis {
 public:
  const Eigen::MatrixXd& contrast() const { return contrast_; }
  BasisMode mode() const { return mode_; }
  Eigen::Index dim() const { return contrast_.cols(); }        // D
  Eigen::Index coord_dim() const { return contrast_.rows(); }  // D - 1

 private:
  IlrBasis(Eigen::MatrixXd contrast, BasisMode mode) : contrast_(std::move(contrast)), mode_(mode) {}
  Eigen::MatrixXd contrast_;
  BasisMode mode_;

  friend IlrBasis build_basis(Eigen::Index, BasisMode, const std::optional<Eigen::MatrixXi>&);
};

/// Construct a contrast matrix for the requested mode.
///
/// balance mode takes a sequential binary partition as a (D-1) x D sign
/// matrix (+1 / -1 / 0 per row); rows must recursively bipartition {1..D}.
/// When no partition is supplied in balance mode, parts are split into groups
/// as equally as possible.
IlrBasis build_basis(Eigen::Index dim, BasisMode mode,
                     const std::optional<Eigen::MatrixXi>& partition = std::nullopt);

/// Isometric log-ratio coordinates: clr(x) * V^T.
Eigen::VectorXd ilr(const Composition& x, const IlrBasis& basis);

/// Inverse ilr: closure(exp(y * V)); guarded against exp overflow/underflow.
Composition ilr_inv(const Eigen::VectorXd& y, const IlrBasis& basis, double kappa = 1.0);

}  // namespace cstar
