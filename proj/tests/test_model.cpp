#include <doctest.h>

#include <random>

#include "cstar/model.hpp"
#include "cstar/simulate.hpp"
#include "oracles.hpp"

using namespace cstar;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& gen, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(gen);
  return m;
}

}  // namespace

TEST_CASE("apply_filter matches the dense Kronecker form") {
  std::mt19937_64 gen(21);
  const SpatialWeights w = oracle::random_weights(gen, 3);
  auto ws = std::make_shared<WeightsSpectrum>(w);

  SUBCASE("zero Psi is the identity") {
    SpatialFilter f(Eigen::MatrixXd::Zero(2, 2), ws);
    const Eigen::MatrixXd y = random_matrix(gen, 3, 2);
    CHECK((f.apply(y) - y).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("zero W is the identity") {
    auto ws0 = std::make_shared<WeightsSpectrum>(from_adjacency(3, {}));
    SpatialFilter f(oracle::random_stable_psi(gen, 2), ws0);
    const Eigen::MatrixXd y = random_matrix(gen, 3, 2);
    CHECK((f.apply(y) - y).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("random instance vs dense oracle") {
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::MatrixXd psi = oracle::random_stable_psi(gen, 2);
      SpatialFilter f(psi, ws);
      const Eigen::MatrixXd y = random_matrix(gen, 3, 2);
      const Eigen::VectorXd lhs = oracle::vec(f.apply(y));
      const Eigen::VectorXd rhs = oracle::filter_matrix(psi, w.dense()) * oracle::vec(y);
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("vec/matrix duality of the spatial term") {
  std::mt19937_64 gen(22);
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(gen() % 15);
    const Eigen::Index p = 1 + static_cast<Eigen::Index>(gen() % 3);
    const SpatialWeights w = oracle::random_weights(gen, n);
    const Eigen::MatrixXd psi = random_matrix(gen, p, p);
    const Eigen::MatrixXd y = random_matrix(gen, n, p);
    const Eigen::VectorXd direct = oracle::vec(w.dense() * y * psi);
    const Eigen::VectorXd kron_form = oracle::kron(psi.transpose(), w.dense()) * oracle::vec(y);
    CHECK((direct - kron_form).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("solve_filter inverts apply_filter") {
  std::mt19937_64 gen(23);
  SUBCASE("zero Psi") {
    const SpatialWeights w = oracle::random_weights(gen, 5);
    SpatialFilter f(Eigen::MatrixXd::Zero(2, 2), std::make_shared<WeightsSpectrum>(w));
    const Eigen::MatrixXd r = random_matrix(gen, 5, 2);
    CHECK((f.solve(r) - r).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("round trip") {
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::Index n = 3 + static_cast<Eigen::Index>(gen() % 10);
      const Eigen::Index p = 1 + static_cast<Eigen::Index>(gen() % 3);
      const SpatialWeights w = oracle::random_weights(gen, n);
      SpatialFilter f(oracle::random_stable_psi(gen, p), std::make_shared<WeightsSpectrum>(w));
      const Eigen::MatrixXd y = random_matrix(gen, n, p);
      CHECK((f.solve(f.apply(y)) - y).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("paper-style 9-unit grid vs dense LU") {
    const SpatialWeights w = row_standardize(rook_grid(3));
    Eigen::MatrixXd psi(2, 2);
    psi << 0.7, 0.2, 0.1, 0.7;
    SpatialFilter f(psi, std::make_shared<WeightsSpectrum>(w));
    const Eigen::MatrixXd r = random_matrix(gen, 9, 2);
    const Eigen::MatrixXd s = oracle::filter_matrix(psi, w.dense());
    const Eigen::VectorXd dense = s.partialPivLu().solve(oracle::vec(r));
    CHECK((oracle::vec(f.solve(r)) - dense).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("relative residual contract") {
    const SpatialWeights w = oracle::random_weights(gen, 12);
    SpatialFilter f(oracle::random_stable_psi(gen, 3, 0.9), std::make_shared<WeightsSpectrum>(w));
    const Eigen::MatrixXd r = random_matrix(gen, 12, 3);
    const Eigen::MatrixXd y = f.solve(r);
    CHECK((f.apply(y) - r).norm() / r.norm() < 1e-10);
  }
  SUBCASE("unstable filter refuses to solve") {
    const SpatialWeights w = row_standardize(rook_grid(2));
    SpatialFilter f(1.5 * Eigen::MatrixXd::Identity(2, 2), std::make_shared<WeightsSpectrum>(w));
    CHECK(!f.stable());
    CHECK_THROWS_AS(f.solve(Eigen::MatrixXd::Zero(4, 2)), NumericError);
  }
}

TEST_CASE("log-determinant via the eigenvalue product") {
  std::mt19937_64 gen(24);
  SUBCASE("zero Psi gives zero") {
    const SpatialWeights w = oracle::random_weights(gen, 6);
    SpatialFilter f(Eigen::MatrixXd::Zero(2, 2), std::make_shared<WeightsSpectrum>(w));
    CHECK(f.log_det() == doctest::Approx(0.0));
  }
  SUBCASE("p = 1 on the 2x2 grid") {
    const SpatialWeights w = row_standardize(rook_grid(2));
    Eigen::MatrixXd psi(1, 1);
    psi << 0.5;
    SpatialFilter f(psi, std::make_shared<WeightsSpectrum>(w));
    CHECK(f.log_det() == doctest::Approx(oracle::dense_log_det(psi, w.dense())).epsilon(1e-12));
  }
  SUBCASE("p = 1 exactness up to n = 25") {
    for (Eigen::Index side : {3, 4, 5}) {
      const SpatialWeights w = row_standardize(rook_grid(side));
      for (double v : {-0.7, -0.2, 0.3, 0.8}) {
        Eigen::MatrixXd psi(1, 1);
        psi << v;
        SpatialFilter f(psi, std::make_shared<WeightsSpectrum>(w));
        CHECK(f.log_det() == doctest::Approx(oracle::dense_log_det(psi, w.dense())).epsilon(1e-11));
      }
    }
  }
  SUBCASE("random instances vs dense determinant") {
    for (int rep = 0; rep < 40; ++rep) {
      const Eigen::Index n = 4 + static_cast<Eigen::Index>(gen() % 13);
      const Eigen::Index p = 1 + static_cast<Eigen::Index>(gen() % 3);
      const SpatialWeights w = oracle::random_weights(gen, n);
      const Eigen::MatrixXd psi = oracle::random_stable_psi(gen, p, 0.85);
      SpatialFilter f(psi, std::make_shared<WeightsSpectrum>(w));
      const double dense = oracle::dense_log_det(psi, w.dense());
      CHECK(std::abs(f.log_det() - dense) < 1e-9 * std::max(1.0, std::abs(dense)));
    }
  }
}

TEST_CASE("stability check") {
  const SpatialWeights w = row_standardize(rook_grid(3));
  SUBCASE("reference Psi is stable with the sufficient bound visible") {
    Eigen::MatrixXd psi(2, 2);
    psi << 0.7, 0.2, 0.1, 0.7;
    const StabilityReport rep = stability_check(psi, w);
    CHECK(rep.stable);
    CHECK(rep.psi_norm_1 == doctest::Approx(0.9));
    CHECK(rep.w_norm_inf == doctest::Approx(1.0));
    CHECK(rep.sufficient_bound_ok);
    CHECK(rep.spectral_product == doctest::Approx(0.7 + std::sqrt(0.02)).epsilon(1e-9));
  }
  SUBCASE("inflated identity is unstable") {
    CHECK(!stability_check(1.5 * Eigen::MatrixXd::Identity(2, 2), w).stable);
  }
  SUBCASE("zero Psi is always stable") {
    CHECK(stability_check(Eigen::MatrixXd::Zero(3, 3), w).stable);
  }
  SUBCASE("monotone in scaling") {
    std::mt19937_64 gen(25);
    const Eigen::MatrixXd psi = oracle::random_stable_psi(gen, 2, 0.95);
    REQUIRE(stability_check(psi, w).stable);
    for (double c : {0.0, 0.25, 0.5, 0.75, 1.0}) CHECK(stability_check(c * psi, w).stable);
  }
}

TEST_CASE("temporal spectral radius flags the explosive reference design") {
  const auto ws = WeightsSpectrum(row_standardize(rook_grid(4)));
  Eigen::MatrixXd psi(2, 2), pi(2, 2);
  psi << 0.7, 0.2, 0.1, 0.7;
  pi << 0.1, 0.1, 0.2, 0.1;
  // the nu = 1 mode of a row-stochastic W drives (I - Psi^T)^{-1} Pi^T
  CHECK(temporal_spectral_radius(psi, pi, ws) == doctest::Approx(1.6576111154).epsilon(1e-8));
  CHECK(temporal_spectral_radius(psi, 0.5 * pi, ws) == doctest::Approx(0.8288055577).epsilon(1e-8));
}

TEST_CASE("residuals invert the generating recursion") {
  std::mt19937_64 gen(26);
  const SpatialWeights w = row_standardize(rook_grid(3));

  SUBCASE("zero parameters leave Y_t") {
    ModelParams params{Eigen::MatrixXd(), Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), 1.0};
    PanelData data;
    data.Y0 = random_matrix(gen, 9, 2);
    for (int t = 0; t < 3; ++t) data.Y.push_back(random_matrix(gen, 9, 2));
    const auto e = residuals(params, data, w);
    for (std::size_t t = 0; t < e.size(); ++t)
      CHECK((e[t] - data.Y[t]).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("zero-noise simulation recovers zero residuals") {
    ModelParams params = oracle::stable_demo_params();
    params.sigma2 = 0.0;
    SimConfig cfg;
    cfg.params = params;
    cfg.T = 12;
    cfg.burn_in = 20;
    cfg.seed = 5;
    cfg.regressors = {true, 2};
    const SimOutput sim = simulate(cfg, w);
    const auto e = residuals(params, sim.panel, w);
    for (const auto& et : e) CHECK(et.cwiseAbs().maxCoeff() < 1e-10);

    // perturbed parameters produce visible residuals
    ModelParams off = params;
    off.Pi(0, 0) += 1e-3;
    const auto e2 = residuals(off, sim.panel, w);
    double total = 0.0;
    for (const auto& et : e2) total += et.cwiseAbs().maxCoeff();
    CHECK(total > 1e-6);
  }

  SUBCASE("matrix form equals the vec form") {
    for (int rep = 0; rep < 10; ++rep) {
      const Eigen::Index n = 4 + static_cast<Eigen::Index>(gen() % 6);
      const SpatialWeights wr = oracle::random_weights(gen, n);
      ModelParams params{random_matrix(gen, 2, 2), oracle::random_stable_psi(gen, 2),
                         random_matrix(gen, 2, 2, 0.3), 1.0};
      PanelData data;
      data.Y0 = random_matrix(gen, n, 2);
      for (int t = 0; t < 4; ++t) {
        data.Y.push_back(random_matrix(gen, n, 2));
        data.X.push_back({Eigen::MatrixXd::Ones(n, 2), random_matrix(gen, n, 2)});
      }
      const auto mat_form = residuals(params, data, wr);
      const auto vec_form = oracle::vec_residuals(params, data, wr.dense());
      for (std::size_t t = 0; t < mat_form.size(); ++t)
        CHECK((oracle::vec(mat_form[t]) - vec_form[t]).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SUBCASE("shape mismatches are rejected") {
    ModelParams params{Eigen::MatrixXd(), Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), 1.0};
    PanelData data;
    data.Y0 = random_matrix(gen, 4, 2);
    data.Y.push_back(random_matrix(gen, 4, 2));
    CHECK_THROWS_AS(residuals(params, data, w), ValidationError);  // w is 9x9
  }
}

TEST_CASE("non-finite responses are named in the diagnostic") {
  PanelData data;
  data.Y0 = Eigen::MatrixXd::Zero(3, 2);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 2);
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  data.Y.push_back(bad);
  try {
    data.validate();
    CHECK(false);
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("unit 1") != std::string::npos);
    CHECK(msg.find("time 1") != std::string::npos);
  }
}
