#pragma once
// Characteristic numbers of the curvature bundle and SU(2) x SU(2)
// character arithmetic.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace defcon {

struct TopoData {
  long chi = 0;
  long tau = 0;
};

// index of the gauge-fixed deformation operator: -5 chi - 7 tau.
long index(const TopoData& d);

struct P1Report {
  long p1 = 0;
  long energy_bound_pi2 = 0;  // energy >= energy_bound_pi2 * pi^2
  bool definite_feasible = false;
  bool hitchin_thorpe = false;
};
P1Report p1_and_bounds(const TopoData& d);

struct Rational {
  std::int64_t num = 0, den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1);
  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator-() const { return {-num, den}; }
  bool operator==(const Rational&) const = default;
};

// Element of the degree <= 4 cohomology ring generated by c2(S+) and p1(X),
// both of degree 4, so all products of positive-degree parts vanish.
struct FormalClass {
  Rational rank, c2, p1;
  FormalClass operator+(const FormalClass& o) const;
  FormalClass operator-(const FormalClass& o) const;
  FormalClass operator*(const FormalClass& o) const;
};

FormalClass ch_S_plus();
FormalClass ch_S2_plus();
FormalClass ch_S3_plus();
FormalClass a_hat();

// - int A-hat ch(S^3_+), with int p1 = 3 tau and int c2(S+) = -(2 chi + 3 tau)/4.
long index_via_characters(const TopoData& d);

// Character of an SU(2)_+ x SU(2)_- representation as a Laurent polynomial
// in (x, y); exponents are weights, so S^m has exponents m, m-2, ..., -m.
class CharPoly {
 public:
  using Key = std::pair<int, int>;

  CharPoly() = default;
  static CharPoly irrep(int a, int b);  // S^a_+ (x) S^b_-
  static CharPoly trivial() { return irrep(0, 0); }
  static CharPoly from_weights(const std::vector<Key>& w);

  CharPoly operator+(const CharPoly& o) const;
  CharPoly operator-(const CharPoly& o) const;
  CharPoly operator*(const CharPoly& o) const;
  bool operator==(const CharPoly& o) const { return c_ == o.c_; }

  CharPoly adams2() const;      // chi(g^2)
  CharPoly sym2() const;        // (chi^2 + psi^2 chi) / 2
  long dimension() const;
  bool weyl_symmetric() const;
  // Multiplicities of irreducibles by highest-weight peeling; throws if the
  // polynomial is not a genuine character.
  std::map<Key, long> decompose() const;
  const std::map<Key, long>& coefficients() const { return c_; }

 private:
  void add(const Key& k, long v);
  std::map<Key, long> c_;
};

CharPoly vector_rep();        // R^4 (x) C from the weights of the maximal torus of SO(4)
CharPoly lambda2(const CharPoly& v);
CharPoly lambda_plus();       // summand of Lambda^2 on which SU(2)_- acts trivially

struct SpinRepItem {
  int item = 0;
  std::string statement;
  long dim_lhs = 0, dim_rhs = 0;
  bool holds = false;
};
std::vector<SpinRepItem> spinrep_check();

}  // namespace defcon
