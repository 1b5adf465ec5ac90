#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sgeig/quadrature.hpp"

using namespace sgeig;

TEST_CASE("gauss-hermite small rules match closed forms") {
  Rule1D r1 = gauss_hermite(1);
  REQUIRE(r1.nodes == Vec{0.0});
  REQUIRE(r1.weights == Vec{1.0});

  Rule1D r2 = gauss_hermite(2);
  REQUIRE(r2.nodes[0] == Catch::Approx(-1.0).margin(1e-14));
  REQUIRE(r2.nodes[1] == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(r2.weights[0] == Catch::Approx(0.5).margin(1e-14));
  REQUIRE(r2.weights[1] == Catch::Approx(0.5).margin(1e-14));

  // 4th Gaussian moment
  Rule1D r3 = gauss_hermite(3);
  double m4 = 0.0;
  for (int i = 0; i < 3; ++i) m4 += std::pow(r3.nodes[i], 4) * r3.weights[i];
  REQUIRE(m4 == Catch::Approx(3.0).margin(1e-13));
}

TEST_CASE("gauss-legendre small rules match closed forms") {
  Rule1D r1 = gauss_legendre(1);
  REQUIRE(r1.nodes == Vec{0.0});
  REQUIRE(r1.weights == Vec{1.0});

  Rule1D r2 = gauss_legendre(2);
  REQUIRE(r2.nodes[0] == Catch::Approx(-1.0 / std::sqrt(3.0)).margin(1e-14));
  REQUIRE(r2.nodes[1] == Catch::Approx(1.0 / std::sqrt(3.0)).margin(1e-14));
  double m2 = 0.0;
  for (int i = 0; i < 2; ++i) m2 += r2.nodes[i] * r2.nodes[i] * r2.weights[i];
  REQUIRE(m2 == Catch::Approx(1.0 / 3.0).margin(1e-14));
}

TEST_CASE("rule invariants: increasing nodes, unit weight sum") {
  for (Family fam : {Family::hermite, Family::legendre}) {
    for (int n : {2, 5, 9, 16}) {
      Rule1D r = gauss_rule(fam, n);
      double ws = 0.0;
      for (int i = 0; i < n; ++i) {
        ws += r.weights[i];
        if (i) REQUIRE(r.nodes[i] > r.nodes[i - 1]);
      }
      REQUIRE(ws == Catch::Approx(1.0).margin(1e-14));
    }
  }
  REQUIRE_THROWS(gauss_hermite(0));
  REQUIRE_THROWS(gauss_legendre(0));
}

TEST_CASE("smolyak grid sizes for three variables") {
  REQUIRE(smolyak(Family::hermite, 3, 0).size() == 1);
  REQUIRE(smolyak(Family::hermite, 3, 1).size() == 7);
  REQUIRE(smolyak(Family::hermite, 3, 2).size() == 25);
  REQUIRE(smolyak(Family::hermite, 3, 3).size() == 69);
  REQUIRE(smolyak(Family::hermite, 3, 4).size() == 165);
  REQUIRE(smolyak(Family::legendre, 3, 3).size() == 69);
}

TEST_CASE("smolyak level zero is the single mean point") {
  SparseGrid g = smolyak(Family::legendre, 4, 0);
  REQUIRE(g.size() == 1);
  for (double c : g.points[0]) REQUIRE(c == 0.0);
  REQUIRE(g.weights[0] == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("smolyak weights sum to one and integrate moments exactly") {
  SparseGrid g = smolyak(Family::hermite, 3, 3);
  double ws = 0.0;
  for (double w : g.weights) ws += w;
  REQUIRE(ws == Catch::Approx(1.0).margin(1e-12));

  // exact to total degree 2w+1 = 7 for the Gaussian measure
  REQUIRE(integrate(g, [](const Vec& x) { return x[0] * x[0]; }) ==
          Catch::Approx(1.0).margin(1e-12));
  REQUIRE(integrate(g, [](const Vec& x) { return std::pow(x[1], 4); }) ==
          Catch::Approx(3.0).margin(1e-11));
  REQUIRE(integrate(g, [](const Vec& x) { return std::pow(x[2], 6); }) ==
          Catch::Approx(15.0).margin(1e-10));
  REQUIRE(integrate(g, [](const Vec& x) { return x[0] * x[0] * x[1] * x[1]; }) ==
          Catch::Approx(1.0).margin(1e-11));
  REQUIRE(integrate(g, [](const Vec& x) { return x[0] * x[1] * x[2]; }) ==
          Catch::Approx(0.0).margin(1e-12));

  SparseGrid gl = smolyak(Family::legendre, 3, 3);
  REQUIRE(integrate(gl, [](const Vec& x) { return x[0] * x[0]; }) ==
          Catch::Approx(1.0 / 3.0).margin(1e-12));
  REQUIRE(integrate(gl, [](const Vec& x) { return std::pow(x[0], 6); }) ==
          Catch::Approx(1.0 / 7.0).margin(1e-12));
}

TEST_CASE("smolyak rebuild reproduces the identical grid") {
  SparseGrid a = smolyak(Family::hermite, 3, 3);
  SparseGrid b = smolyak(Family::hermite, 3, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.weights[i] == b.weights[i]);
    for (int k = 0; k < 3; ++k) REQUIRE(a.points[i][k] == b.points[i][k]);
  }
}
