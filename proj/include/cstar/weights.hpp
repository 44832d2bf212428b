#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <utility>
#include <vector>

#include "cstar/common.hpp"

namespace cstar {

/// Sparse nonnegative spatial weight matrix with zero diagonal.
///
/// Rows iterate in row-major index order, so likelihood evaluations consume
/// entries in a reproducible order. Immutable after construction.
class SpatialWeights {
 public:
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  SpatialWeights(Eigen::Index n, const std::vector<Eigen::Triplet<double>>& triplets, bool standardized = false);

  Eigen::Index size() const { return matrix_.rows(); }
  bool standardized() const { return standardized_; }
  const Sparse& matrix() const { return matrix_; }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix_); }
  Eigen::Index nonzeros() const { return matrix_.nonZeros(); }

  /// Row indices whose weight row is entirely zero.
  std::vector<Eigen::Index> islands() const;

  double norm_inf() const;  // max absolute row sum
  double norm_1() const;    // max absolute column sum

 private:
  Sparse matrix_;
  bool standardized_;
};

/// Rook contiguity on a side x side grid: cells sharing an edge are adjacent.
SpatialWeights rook_grid(Eigen::Index side);

/// Binary symmetric matrix with ones at the listed (i, j) pairs.
SpatialWeights from_adjacency(Eigen::Index n, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& pairs);

/// Binary matrix with w_ij = 1 iff 0 < euclidean distance(i, j) <= radius.
/// Coordinates are planar; callers project geodesic data beforehand.
SpatialWeights distance_cutoff(const std::vector<std::pair<double, double>>& coords, double radius);

/// Divide every nonempty row by its sum; islands keep their zero rows.
SpatialWeights row_standardize(const SpatialWeights& w);

/// Fraction of structurally zero entries over n^2.
double sparsity(const SpatialWeights& w);

}  // namespace cstar
