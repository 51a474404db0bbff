#include <doctest.h>

#include "common.hpp"
#include "defcon/errors.hpp"
#include "defcon/topology.hpp"

using namespace defcon;

TEST_CASE("index examples") {
  CHECK(index({2, 0}) == -10);
  CHECK(index({3, -1}) == -8);
  CHECK(index({7, 0}) == -35);
  CHECK(index_via_characters({2, 0}) == -10);
  CHECK(index_via_characters({3, -1}) == -8);
}

TEST_CASE("index agrees with the character pipeline") {
  for (long c = -50; c < 50; ++c)
    for (long t = -50; t < 50; ++t) REQUIRE(index_via_characters({c, t}) == index({c, t}));
}

TEST_CASE("Chern characters") {
  CHECK(ch_S2_plus().rank == Rational(3));
  CHECK(ch_S2_plus().c2 == Rational(-4));
  CHECK(ch_S3_plus().rank == Rational(4));
  CHECK(ch_S3_plus().c2 == Rational(-10));
  CHECK(Rational(2, -4) == Rational(-1, 2));
}

TEST_CASE("p1 and bounds") {
  P1Report s4 = p1_and_bounds({2, 0});
  CHECK(s4.p1 == 4);
  CHECK(s4.energy_bound_pi2 == 32);
  CHECK(s4.definite_feasible);
  CHECK(s4.hitchin_thorpe);
  P1Report k3 = p1_and_bounds({24, -16});
  CHECK(k3.p1 == 0);
  CHECK(!k3.definite_feasible);
  CHECK(!p1_and_bounds({0, 0}).definite_feasible);
  CHECK(!p1_and_bounds({0, 0}).hitchin_thorpe);
}

TEST_CASE("spin representation identities") {
  const auto items = spinrep_check();
  REQUIRE(items.size() == 6);
  const long dims[6] = {4, 3, 5, 8, 12, 32};
  for (int i = 0; i < 6; ++i) {
    CHECK(items[i].holds);
    CHECK(items[i].dim_lhs == dims[i]);
    CHECK(items[i].dim_rhs == dims[i]);
  }
  const CharPoly Sp = CharPoly::irrep(1, 0);
  CHECK(Sp * Sp == CharPoly::trivial() + CharPoly::irrep(2, 0));
  CHECK(Sp * CharPoly::irrep(2, 0) == Sp + CharPoly::irrep(3, 0));
  CHECK(!(CharPoly::irrep(3, 0) * Sp == CharPoly::irrep(4, 0) + CharPoly::irrep(0, 2)));
}

TEST_CASE("Clebsch-Gordan multiplicities") {
  for (int a = 0; a <= 6; ++a)
    for (int b = 0; b <= 6; ++b) {
      const CharPoly p = CharPoly::irrep(a, 0) * CharPoly::irrep(b, 0);
      const auto dec = p.decompose();
      long dim = 0;
      for (const auto& [k, m] : dec) {
        CHECK(m == 1);
        CHECK(k.second == 0);
        dim += CharPoly::irrep(k.first, 0).dimension();
      }
      CHECK(dim == (a + 1) * (b + 1));
      CHECK(long(dec.size()) == std::min(a, b) + 1);
    }
}

TEST_CASE("character ring laws") {
  const CharPoly a = CharPoly::irrep(2, 1), b = CharPoly::irrep(1, 3), c = CharPoly::irrep(3, 0) + CharPoly::trivial();
  CHECK(a * b == b * a);
  CHECK((a * b) * c == a * (b * c));
  CHECK((a * b * c).weyl_symmetric());
  CHECK(lambda2(vector_rep()).dimension() == 6);
  CHECK(CharPoly::irrep(2, 0).sym2().dimension() == 6);
  CHECK_THROWS_AS((CharPoly::trivial() - CharPoly::irrep(2, 0)).decompose(), Error);
}
