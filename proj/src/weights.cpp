#include "cstar/weights.hpp"

#include <cmath>
#include <set>

namespace cstar {

SpatialWeights::SpatialWeights(Eigen::Index n, const std::vector<Eigen::Triplet<double>>& triplets,
                               bool standardized)
    : standardized_(standardized) {
  if (n < 1) throw ValidationError("weight matrix needs n >= 1");
  for (const auto& t : triplets) {
    if (t.row() < 0 || t.row() >= n || t.col() < 0 || t.col() >= n)
      throw ValidationError("weight entry (" + std::to_string(t.row()) + "," + std::to_string(t.col()) +
                            ") out of range");
    if (t.row() == t.col() && t.value() != 0.0) throw ValidationError("weight matrix must have zero diagonal");
    if (!(t.value() >= 0.0) || !std::isfinite(t.value()))
      throw ValidationError("weight entries must be finite and nonnegative");
  }
  matrix_.resize(n, n);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());  // duplicates sum
  matrix_.prune(0.0);
  matrix_.makeCompressed();
}

std::vector<Eigen::Index> SpatialWeights::islands() const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < matrix_.rows(); ++i) {
    if (matrix_.outerIndexPtr()[i] == matrix_.outerIndexPtr()[i + 1]) out.push_back(i);
  }
  return out;
}

double SpatialWeights::norm_inf() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < matrix_.rows(); ++i) {
    double s = 0.0;
    for (Sparse::InnerIterator it(matrix_, i); it; ++it) s += std::abs(it.value());
    m = std::max(m, s);
  }
  return m;
}

double SpatialWeights::norm_1() const {
  Eigen::VectorXd colsum = Eigen::VectorXd::Zero(matrix_.cols());
  for (Eigen::Index i = 0; i < matrix_.rows(); ++i)
    for (Sparse::InnerIterator it(matrix_, i); it; ++it) colsum[it.col()] += std::abs(it.value());
  return colsum.size() ? colsum.maxCoeff() : 0.0;
}

SpatialWeights rook_grid(Eigen::Index side) {
  if (side < 2) throw ValidationError("rook grid needs side >= 2");
  const Eigen::Index n = side * side;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(4 * side * (side - 1)));
  auto idx = [side](Eigen::Index r, Eigen::Index c) { return r * side + c; };
  for (Eigen::Index r = 0; r < side; ++r) {
    for (Eigen::Index c = 0; c < side; ++c) {
      if (c + 1 < side) {
        trip.emplace_back(idx(r, c), idx(r, c + 1), 1.0);
        trip.emplace_back(idx(r, c + 1), idx(r, c), 1.0);
      }
      if (r + 1 < side) {
        trip.emplace_back(idx(r, c), idx(r + 1, c), 1.0);
        trip.emplace_back(idx(r + 1, c), idx(r, c), 1.0);
      }
    }
  }
  return SpatialWeights(n, trip, false);
}

SpatialWeights from_adjacency(Eigen::Index n, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& pairs) {
  std::set<std::pair<Eigen::Index, Eigen::Index>> edges;  // collapse duplicates to a single 1
  for (const auto& [i, j] : pairs) {
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw ValidationError("adjacency pair (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
    if (i == j) throw ValidationError("self loop at index " + std::to_string(i));
    edges.emplace(i, j);
    edges.emplace(j, i);
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(edges.size());
  for (const auto& [i, j] : edges) trip.emplace_back(i, j, 1.0);
  return SpatialWeights(n, trip, false);
}

SpatialWeights distance_cutoff(const std::vector<std::pair<double, double>>& coords, double radius) {
  if (!(radius > 0.0)) throw ValidationError("distance cutoff radius must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(coords.size());
  if (n < 1) throw ValidationError("distance cutoff needs at least one point");
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dx = coords[i].first - coords[j].first;
      const double dy = coords[i].second - coords[j].second;
      const double d = std::hypot(dx, dy);
      if (d > 0.0 && d <= radius) {
        trip.emplace_back(i, j, 1.0);
        trip.emplace_back(j, i, 1.0);
      }
    }
  }
  return SpatialWeights(n, trip, false);
}

SpatialWeights row_standardize(const SpatialWeights& w) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(w.nonzeros()));
  const auto& m = w.matrix();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (SpatialWeights::Sparse::InnerIterator it(m, i); it; ++it) s += it.value();
    if (s > 0.0) {
      for (SpatialWeights::Sparse::InnerIterator it(m, i); it; ++it)
        trip.emplace_back(i, it.col(), it.value() / s);
    }
  }
  return SpatialWeights(m.rows(), trip, true);
}

double sparsity(const SpatialWeights& w) {
  const double n = static_cast<double>(w.size());
  return 1.0 - static_cast<double>(w.nonzeros()) / (n * n);
}

}  // namespace cstar
