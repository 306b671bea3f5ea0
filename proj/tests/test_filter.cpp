#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "wcto/filter.hpp"
#include "wcto/mesh.hpp"

using namespace wcto;

TEST_CASE("small radius is the identity map") {
  Mesh m = build_mesh(5, 4, 5.0, 4.0);  // pitch 1 both ways
  DensityFilter f(m, 0.75);
  Eigen::VectorXd rho = Eigen::VectorXd::LinSpaced(m.n_elem, 0.0, 1.0);
  CHECK((f.apply(rho) - rho).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((f.chain_transpose(rho) - rho).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK_THROWS_AS(DensityFilter(m, 0.0), std::invalid_argument);
}

TEST_CASE("1D three-element rows: hand-evaluated conic weights") {
  // kernel max(0, R - d) with self-distance 0 and neighbor distance = pitch
  Mesh m = build_mesh(3, 1, 3.0, 1.0);
  {
    // R = 1.5*pitch: raw weights (0.5, 1.5, 0.5)*pitch*v -> (0.2, 0.6, 0.2)
    DensityFilter f(m, 1.5);
    auto row = f.row(1);
    REQUIRE(row.size() == 3);
    CHECK(row[0].second == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(row[1].second == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(row[2].second == doctest::Approx(0.2).epsilon(1e-14));
    Eigen::Vector3d rho(1.0, 0.5, 0.25);
    CHECK(f.apply(rho)[1] ==
          doctest::Approx(0.2 * 1.0 + 0.6 * 0.5 + 0.2 * 0.25).epsilon(1e-14));
  }
  {
    // R = 2*pitch: raw weights (1, 2, 1)*pitch*v -> (0.25, 0.5, 0.25)
    DensityFilter f(m, 2.0);
    auto row = f.row(1);
    REQUIRE(row.size() == 3);
    CHECK(row[0].second == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(row[1].second == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(row[2].second == doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("interior weights are radially symmetric") {
  Mesh m = build_mesh(7, 7, 7.0, 7.0);
  DensityFilter f(m, 2.5);
  const int e = m.elem_id(3, 3);
  auto row = f.row(e);
  // neighbors at mirrored offsets must carry equal weight
  auto weight_of = [&](int ix, int iy) {
    const int j = m.elem_id(ix, iy);
    for (auto& [col, w] : row)
      if (col == j) return w;
    return -1.0;
  };
  CHECK(weight_of(3 + 1, 3) == doctest::Approx(weight_of(3 - 1, 3)).epsilon(1e-14));
  CHECK(weight_of(3, 3 + 2) == doctest::Approx(weight_of(3, 3 - 2)).epsilon(1e-14));
  CHECK(weight_of(3 + 1, 3 + 1) == doctest::Approx(weight_of(3 - 1, 3 - 1)).epsilon(1e-14));
  CHECK(weight_of(3 + 1, 3) == doctest::Approx(weight_of(3, 3 + 1)).epsilon(1e-14));
}

TEST_CASE("row-stochastic, bound-preserving, linear") {
  Mesh m = build_mesh(8, 5, 2.0, 1.0);
  DensityFilter f(m, 0.3);
  CHECK((f.apply(Eigen::VectorXd::Ones(m.n_elem)) - Eigen::VectorXd::Ones(m.n_elem))
            .lpNorm<Eigen::Infinity>() < 1e-14);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.2, 0.8);
  Eigen::VectorXd rho(m.n_elem);
  for (int e = 0; e < m.n_elem; ++e) rho[e] = unif(rng);
  Eigen::VectorXd rf = f.apply(rho);
  CHECK(rf.minCoeff() >= 0.2 - 1e-14);
  CHECK(rf.maxCoeff() <= 0.8 + 1e-14);

  Eigen::VectorXd rho2 = rho.reverse();
  CHECK((f.apply((0.3 * rho + 0.7 * rho2).eval()) -
         (0.3 * f.apply(rho) + 0.7 * f.apply(rho2)))
            .lpNorm<Eigen::Infinity>() < 1e-14);

  // constant field is a fixed point
  Eigen::VectorXd c = Eigen::VectorXd::Constant(m.n_elem, 0.37);
  CHECK((f.apply(c) - c).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("apply matches a dense matrix oracle on a 4x4 mesh") {
  Mesh m = build_mesh(4, 4, 1.0, 1.0);
  DensityFilter f(m, 0.4);
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(m.n_elem, m.n_elem);
  for (int e = 0; e < m.n_elem; ++e) {
    double norm = 0.0;
    for (int j = 0; j < m.n_elem; ++j) {
      const double d = (m.centers.row(e) - m.centers.row(j)).norm();
      if (d < 0.4) {
        F(e, j) = (0.4 - d) * m.volume[j];
        norm += F(e, j);
      }
    }
    F.row(e) /= norm;
  }
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd rho(m.n_elem);
  for (int e = 0; e < m.n_elem; ++e) rho[e] = unif(rng);
  CHECK((f.apply(rho) - F * rho).lpNorm<Eigen::Infinity>() < 1e-14);
  CHECK((f.chain_transpose(rho) - F.transpose() * rho).lpNorm<Eigen::Infinity>() < 1e-14);

  // unit-vector probe returns a normalized filter column
  Eigen::VectorXd ek = Eigen::VectorXd::Zero(m.n_elem);
  ek[5] = 1.0;
  CHECK((f.chain_transpose(ek) - F.row(5).transpose()).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("adjoint identity on random pairs") {
  Mesh m = build_mesh(6, 3, 2.0, 1.0);
  DensityFilter f(m, 0.35);
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd x(m.n_elem), y(m.n_elem);
    for (int e = 0; e < m.n_elem; ++e) {
      x[e] = gauss(rng);
      y[e] = gauss(rng);
    }
    CHECK(f.apply(x).dot(y) == doctest::Approx(x.dot(f.chain_transpose(y)))
                                   .epsilon(1e-12)
                                   .scale(std::max(1.0, std::abs(x.dot(y)))));
  }
}
