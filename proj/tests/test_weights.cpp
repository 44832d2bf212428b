#include <doctest.h>

#include "cstar/weights.hpp"

using namespace cstar;

namespace {

// brute-force neighbor count on the grid
int grid_neighbors(Eigen::Index side, Eigen::Index r, Eigen::Index c) {
  int k = 0;
  if (r > 0) ++k;
  if (r + 1 < side) ++k;
  if (c > 0) ++k;
  if (c + 1 < side) ++k;
  return k;
}

}  // namespace

TEST_CASE("rook grid neighbor structure") {
  const SpatialWeights w2 = rook_grid(2);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(w2.dense().row(i).sum() == doctest::Approx(2.0));

  const SpatialWeights w4 = rook_grid(4);
  const Eigen::MatrixXd d = w4.dense();
  for (Eigen::Index r = 0; r < 4; ++r)
    for (Eigen::Index c = 0; c < 4; ++c)
      CHECK(d.row(r * 4 + c).sum() == doctest::Approx(grid_neighbors(4, r, c)));
  CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.diagonal().cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(rook_grid(1), ValidationError);
}

TEST_CASE("rook grid directed edge count is 4k(k-1)") {
  for (Eigen::Index k = 2; k <= 6; ++k) CHECK(rook_grid(k).nonzeros() == 4 * k * (k - 1));
}

TEST_CASE("adjacency ingestion symmetrizes and deduplicates") {
  CHECK(from_adjacency(3, {}).nonzeros() == 0);

  const SpatialWeights w = from_adjacency(3, {{0, 1}});
  CHECK(w.dense()(0, 1) == 1.0);
  CHECK(w.dense()(1, 0) == 1.0);
  CHECK(w.nonzeros() == 2);

  const SpatialWeights dup = from_adjacency(3, {{0, 1}, {1, 0}, {0, 1}});
  CHECK(dup.dense()(0, 1) == 1.0);
  CHECK(dup.nonzeros() == 2);

  CHECK_THROWS_AS(from_adjacency(3, {{0, 0}}), ValidationError);
  CHECK_THROWS_AS(from_adjacency(3, {{0, 3}}), ValidationError);
}

TEST_CASE("distance cutoff") {
  const std::vector<std::pair<double, double>> tri = {{0, 0}, {1, 0}, {2, 0}};
  CHECK(distance_cutoff(tri, 0.5).nonzeros() == 0);
  CHECK(distance_cutoff(tri, 10.0).nonzeros() == 6);

  const SpatialWeights w = distance_cutoff(tri, 1.0);
  const Eigen::MatrixXd d = w.dense();
  CHECK(d(0, 1) == 1.0);
  CHECK(d(1, 2) == 1.0);
  CHECK(d(0, 2) == 0.0);
  CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(distance_cutoff(tri, 0.0), ValidationError);
  CHECK_THROWS_AS(distance_cutoff(tri, -1.0), ValidationError);
}

TEST_CASE("row standardization") {
  const SpatialWeights std2 = row_standardize(rook_grid(2));
  CHECK(std2.standardized());
  const Eigen::MatrixXd d = std2.dense();
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      if (d(i, j) != 0.0) CHECK(d(i, j) == doctest::Approx(0.5));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(d.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));

  // idempotence
  const SpatialWeights twice = row_standardize(std2);
  CHECK((twice.dense() - d).cwiseAbs().maxCoeff() < 1e-15);

  CHECK(std2.norm_inf() == doctest::Approx(1.0));
}

TEST_CASE("islands keep zero rows and are reported") {
  // point 2 is far away from the cluster
  const std::vector<std::pair<double, double>> pts = {{0, 0}, {1, 0}, {100, 100}};
  const SpatialWeights w = row_standardize(distance_cutoff(pts, 2.0));
  const auto isl = w.islands();
  REQUIRE(isl.size() == 1);
  CHECK(isl[0] == 2);
  CHECK(w.dense().row(2).cwiseAbs().sum() == 0.0);
  CHECK(w.dense().row(0).sum() == doctest::Approx(1.0));
}

TEST_CASE("sparsity fractions") {
  CHECK(sparsity(from_adjacency(4, {})) == doctest::Approx(1.0));
  CHECK(sparsity(rook_grid(4)) == doctest::Approx(1.0 - 48.0 / 256.0));
  // complete graph: only the diagonal is zero
  std::vector<std::pair<Eigen::Index, Eigen::Index>> all;
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = i + 1; j < 5; ++j) all.emplace_back(i, j);
  CHECK(sparsity(from_adjacency(5, all)) == doctest::Approx(1.0 / 5.0));
}

TEST_CASE("weight matrix validation") {
  CHECK_THROWS_AS(SpatialWeights(3, {{Eigen::Triplet<double>(0, 0, 1.0)}}), ValidationError);
  CHECK_THROWS_AS(SpatialWeights(3, {{Eigen::Triplet<double>(0, 1, -1.0)}}), ValidationError);
  CHECK_THROWS_AS(SpatialWeights(2, {{Eigen::Triplet<double>(0, 5, 1.0)}}), ValidationError);
  CHECK_NOTHROW(SpatialWeights(1, {}));
}

TEST_CASE("row-major iteration order is deterministic") {
  const SpatialWeights w = rook_grid(3);
  Eigen::Index last_row = -1, last_col = -1;
  for (Eigen::Index i = 0; i < w.matrix().rows(); ++i) {
    for (SpatialWeights::Sparse::InnerIterator it(w.matrix(), i); it; ++it) {
      const bool advanced = it.row() > last_row || (it.row() == last_row && it.col() > last_col);
      CHECK(advanced);
      last_row = it.row();
      last_col = it.col();
    }
  }
}
