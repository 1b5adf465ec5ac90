#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sgeig/gpc.hpp"

using namespace sgeig;

namespace {

long long fact(int n) {
  long long r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// Closed-form 1D probabilists' Hermite triple product (test oracle):
// E[p_i p_j p_k] = sqrt(i! j! k!) / ((s-i)! (s-j)! (s-k)!) when i+j+k = 2s
// is even and s >= max(i,j,k); zero otherwise.
double hermite_triple_1d(int i, int j, int k) {
  const int t = i + j + k;
  if (t % 2) return 0.0;
  const int s = t / 2;
  if (s < i || s < j || s < k) return 0.0;
  return std::sqrt(double(fact(i)) * fact(j) * fact(k)) /
         (double(fact(s - i)) * fact(s - j) * fact(s - k));
}

long long choose(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST_CASE("multi-index enumeration: counts and canonical order") {
  auto idx = multi_indices(3, 3);
  REQUIRE(idx.size() == 20);
  const std::vector<std::vector<int>> first10 = {
      {0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {2, 0, 0},
      {1, 1, 0}, {1, 0, 1}, {0, 2, 0}, {0, 1, 1}, {0, 0, 2}};
  for (int k = 0; k < 10; ++k) REQUIRE(idx[k].degrees == first10[k]);

  REQUIRE(multi_indices(3, 6).size() == 84);
  REQUIRE(multi_indices(5, 0).size() == 1);
  REQUIRE(multi_indices(5, 0)[0].total() == 0);
}

TEST_CASE("per-degree block counts match the binomial identity") {
  GpcBasis b(Family::hermite, 3, 4);
  for (int d = 0; d <= 4; ++d) {
    const int count = b.degree_end(d) - b.degree_begin(d);
    REQUIRE(count == choose(3 + d, d) - choose(3 + d - 1, d - 1));
    for (int k = b.degree_begin(d); k < b.degree_end(d); ++k)
      REQUIRE(b.indices()[k].total() == d);
  }
  REQUIRE(b.degree_end(4) == b.size());
}

TEST_CASE("basis evaluation at pinned points") {
  GpcBasis h12(Family::hermite, 1, 2);
  Vec v = h12.eval(Vec{1.0});
  REQUIRE(v[0] == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(v[1] == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(v[2] == Catch::Approx(0.0).margin(1e-15));  // (x^2-1)/sqrt(2) at 1

  GpcBasis l11(Family::legendre, 1, 1);
  Vec u = l11.eval(Vec{1.0});
  REQUIRE(u[0] == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(u[1] == Catch::Approx(std::sqrt(3.0)).margin(1e-14));

  GpcBasis h33(Family::hermite, 3, 3);
  Vec z = h33.eval(Vec{0.0, 0.0, 0.0});
  REQUIRE(z[0] == 1.0);
  for (int k = 0; k < h33.size(); ++k)
    if (h33.indices()[k].total() % 2) REQUIRE(z[k] == 0.0);

  REQUIRE_THROWS(h33.eval(Vec{0.0, 0.0}));
}

TEST_CASE("basis is orthonormal under the sparse grid") {
  for (Family fam : {Family::hermite, Family::legendre}) {
    GpcBasis b(fam, 3, 3);
    SparseGrid g = smolyak(fam, 3, 3);  // exact to total degree 7
    Matrix gram(b.size(), b.size());
    Vec psi(b.size());
    for (std::size_t q = 0; q < g.size(); ++q) {
      b.eval(g.points[q].data(), psi.data());
      for (int j = 0; j < b.size(); ++j)
        for (int i = 0; i < b.size(); ++i)
          gram(i, j) += psi[i] * psi[j] * g.weights[q];
    }
    for (int j = 0; j < b.size(); ++j)
      for (int i = 0; i < b.size(); ++i)
        REQUIRE(gram(i, j) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-10));
  }
}

TEST_CASE("triple-product tensor: first slice is the identity") {
  for (Family fam : {Family::hermite, Family::legendre}) {
    GpcBasis ba(fam, 3, 6), bs(fam, 3, 3);
    TripleProductTensor t = triple_product_tensor(ba, bs);
    REQUIRE(t.slices[0].size() == std::size_t(bs.size()));
    for (const TripleEntry& e : t.slices[0]) {
      REQUIRE(e.k == e.j);
      REQUIRE(e.value == Catch::Approx(1.0).margin(1e-13));
    }
  }
}

TEST_CASE("triple-product tensor: pinned nonzero count and symmetry") {
  GpcBasis ba(Family::hermite, 3, 6), bs(Family::hermite, 3, 3);
  TripleProductTensor t = triple_product_tensor(ba, bs);
  REQUIRE(t.n_a == 84);
  REQUIRE(t.n_xi == 20);
  REQUIRE(t.nonzero_count() == 806);
  for (int l = 0; l < t.n_a; ++l)
    for (const TripleEntry& e : t.slices[l]) {
      bool found = false;
      for (const TripleEntry& f : t.slices[l])
        if (f.k == e.j && f.j == e.k) {
          REQUIRE(f.value == e.value);
          found = true;
          break;
        }
      REQUIRE(found);
    }
}

TEST_CASE("hermite tensor matches the closed-form oracle") {
  GpcBasis ba(Family::hermite, 1, 6), bs(Family::hermite, 1, 3);
  TripleProductTensor t = triple_product_tensor(ba, bs);
  // E[p_1 p_1 p_2] = sqrt(2)
  REQUIRE(hermite_triple_1d(1, 1, 2) == Catch::Approx(std::sqrt(2.0)).margin(1e-15));
  for (int l = 0; l < t.n_a; ++l) {
    Matrix dense(t.n_xi, t.n_xi);
    for (const TripleEntry& e : t.slices[l]) dense(e.k, e.j) = e.value;
    for (int k = 0; k < t.n_xi; ++k)
      for (int j = 0; j < t.n_xi; ++j)
        REQUIRE(dense(k, j) == Catch::Approx(hermite_triple_1d(l, k, j)).margin(1e-11));
  }

  // multivariate spot check: the oracle factorizes over variables
  GpcBasis ma(Family::hermite, 3, 6), ms(Family::hermite, 3, 3);
  TripleProductTensor mt = triple_product_tensor(ma, ms);
  const auto& ia = ma.indices();
  const auto& is = ms.indices();
  for (int l : {0, 4, 20, 50, 83})
    for (const TripleEntry& e : mt.slices[l]) {
      double expect = 1.0;
      for (int v = 0; v < 3; ++v)
        expect *= hermite_triple_1d(ia[l].degrees[v], is[e.k].degrees[v], is[e.j].degrees[v]);
      REQUIRE(e.value == Catch::Approx(expect).margin(1e-11));
    }
}

TEST_CASE("triple-product tensor rejects mismatched bases") {
  GpcBasis a(Family::hermite, 3, 6), b(Family::legendre, 3, 3);
  REQUIRE_THROWS(triple_product_tensor(a, b));
}
