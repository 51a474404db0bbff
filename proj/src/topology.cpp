#include "defcon/topology.hpp"

#include <cstdlib>
#include <numeric>

#include "defcon/errors.hpp"

namespace defcon {

long index(const TopoData& d) { return -5 * d.chi - 7 * d.tau; }

P1Report p1_and_bounds(const TopoData& d) {
  P1Report r;
  r.p1 = 2 * d.chi + 3 * d.tau;
  r.energy_bound_pi2 = 8 * r.p1;
  r.definite_feasible = r.p1 > 0;
  r.hitchin_thorpe = 2 * d.chi > 3 * std::labs(d.tau);
  return r;
}

Rational::Rational(std::int64_t n, std::int64_t d) {
  if (d == 0) throw Error("zero denominator");
  if (d < 0) n = -n, d = -d;
  const std::int64_t g = std::gcd(n, d);
  num = n / g;
  den = d / g;
}

Rational Rational::operator+(const Rational& o) const { return {num * o.den + o.num * den, den * o.den}; }
Rational Rational::operator-(const Rational& o) const { return *this + (-o); }
Rational Rational::operator*(const Rational& o) const { return {num * o.num, den * o.den}; }

FormalClass FormalClass::operator+(const FormalClass& o) const { return {rank + o.rank, c2 + o.c2, p1 + o.p1}; }
FormalClass FormalClass::operator-(const FormalClass& o) const { return {rank - o.rank, c2 - o.c2, p1 - o.p1}; }
FormalClass FormalClass::operator*(const FormalClass& o) const {
  return {rank * o.rank, rank * o.c2 + c2 * o.rank, rank * o.p1 + p1 * o.rank};
}

FormalClass ch_S_plus() { return {2, -1, 0}; }

// S+ (x) S+ = C + S^2_+
FormalClass ch_S2_plus() { return ch_S_plus() * ch_S_plus() - FormalClass{1, 0, 0}; }

// S+ (x) S^2_+ = S+ + S^3_+
FormalClass ch_S3_plus() { return ch_S_plus() * ch_S2_plus() - ch_S_plus(); }

FormalClass a_hat() { return {1, 0, Rational(-1, 24)}; }

long index_via_characters(const TopoData& d) {
  const FormalClass top = a_hat() * ch_S3_plus();
  const Rational int_p1(3 * d.tau), int_c2(-(2 * d.chi + 3 * d.tau), 4);
  const Rational v = -(top.c2 * int_c2 + top.p1 * int_p1);
  if (v.den != 1) throw Error("non-integral index");
  return v.num;
}

void CharPoly::add(const Key& k, long v) {
  long& c = c_[k];
  c += v;
  if (c == 0) c_.erase(k);
}

CharPoly CharPoly::irrep(int a, int b) {
  CharPoly p;
  for (int i = -a; i <= a; i += 2)
    for (int j = -b; j <= b; j += 2) p.add({i, j}, 1);
  return p;
}

CharPoly CharPoly::from_weights(const std::vector<Key>& w) {
  CharPoly p;
  for (const Key& k : w) p.add(k, 1);
  return p;
}

CharPoly CharPoly::operator+(const CharPoly& o) const {
  CharPoly r = *this;
  for (const auto& [k, v] : o.c_) r.add(k, v);
  return r;
}

CharPoly CharPoly::operator-(const CharPoly& o) const {
  CharPoly r = *this;
  for (const auto& [k, v] : o.c_) r.add(k, -v);
  return r;
}

CharPoly CharPoly::operator*(const CharPoly& o) const {
  CharPoly r;
  for (const auto& [k, v] : c_)
    for (const auto& [l, w] : o.c_) r.add({k.first + l.first, k.second + l.second}, v * w);
  return r;
}

CharPoly CharPoly::adams2() const {
  CharPoly r;
  for (const auto& [k, v] : c_) r.add({2 * k.first, 2 * k.second}, v);
  return r;
}

CharPoly CharPoly::sym2() const {
  CharPoly s = *this * *this + adams2();
  for (auto& [k, v] : s.c_) {
    if (v % 2 != 0) throw Error("odd coefficient in symmetric square");
    v /= 2;
  }
  return s;
}

long CharPoly::dimension() const {
  long n = 0;
  for (const auto& [k, v] : c_) n += v;
  return n;
}

bool CharPoly::weyl_symmetric() const {
  for (const auto& [k, v] : c_) {
    auto f = [&](const Key& q) {
      auto it = c_.find(q);
      return it != c_.end() && it->second == v;
    };
    if (!f({-k.first, k.second}) || !f({k.first, -k.second})) return false;
  }
  return true;
}

std::map<CharPoly::Key, long> CharPoly::decompose() const {
  std::map<Key, long> out;
  CharPoly rest = *this;
  while (!rest.c_.empty()) {
    // Largest first weight, then largest second weight: a highest weight.
    const auto [k, v] = *rest.c_.rbegin();
    if (k.first < 0 || k.second < 0 || v < 0) throw Error("not a character");
    out[k] += v;
    CharPoly ir = irrep(k.first, k.second);
    for (const auto& [w, c] : ir.c_) rest.add(w, -c * v);
  }
  return out;
}

// Torus angles (t1, t2) acting on the planes (x0, x1) and (x2, x3); with
// x = e^{i(t1+t2)/2}, y = e^{i(t1-t2)/2} the weights e^{+-i t1}, e^{+-i t2}
// become x^{+-1} y^{+-1} and x^{+-1} y^{-+1}.
CharPoly vector_rep() { return CharPoly::from_weights({{1, 1}, {-1, -1}, {1, -1}, {-1, 1}}); }

CharPoly lambda2(const CharPoly& v) {
  // (chi^2 - psi^2 chi) / 2
  CharPoly s = v * v - v.adams2();
  CharPoly r;
  for (const auto& [k, c] : s.coefficients()) {
    if (c % 2 != 0) throw Error("odd coefficient in exterior square");
    for (long i = 0; i < c / 2; ++i) r = r + CharPoly::from_weights({k});
    for (long i = 0; i < -c / 2; ++i) r = r - CharPoly::from_weights({k});
  }
  return r;
}

CharPoly lambda_plus() {
  CharPoly r;
  for (const auto& [k, m] : lambda2(vector_rep()).decompose())
    if (k.second == 0)
      for (long i = 0; i < m; ++i) r = r + CharPoly::irrep(k.first, 0);
  return r;
}

std::vector<SpinRepItem> spinrep_check() {
  const CharPoly Sp = CharPoly::irrep(1, 0), Sm = CharPoly::irrep(0, 1);
  const CharPoly S2p = CharPoly::irrep(2, 0), S3p = CharPoly::irrep(3, 0), S4p = CharPoly::irrep(4, 0);
  const CharPoly S2m = CharPoly::irrep(0, 2);
  const CharPoly one = CharPoly::trivial();

  std::vector<SpinRepItem> out;
  auto item = [&](int n, std::string s, const CharPoly& lhs, const CharPoly& rhs) {
    out.push_back({n, std::move(s), lhs.dimension(), rhs.dimension(), lhs == rhs && lhs.weyl_symmetric()});
  };
  item(1, "R^4 (x) C = S+ (x) S-", vector_rep(), Sp * Sm);
  item(2, "Lambda+ (x) C = S^2+", lambda_plus(), S2p);
  item(3, "S^2_0(S^2+) = S^4+", S2p.sym2() - one, S4p);
  item(4, "S^3+ (x) S+ = S^4+ + S^2+", S3p * Sp, S4p + S2p);
  item(5, "(S+ (x) S-) (x) S^2+ = (S+ (x) S-) + (S^3+ (x) S-)", Sp * Sm * S2p, Sp * Sm + S3p * Sm);
  item(6, "(S+ (x) S-) (x) (S^3+ (x) S-) = S^4+ (x) S^2- + S^2+ (x) S^2- + S^4+ + S^2+", Sp * Sm * (S3p * Sm),
       S4p * S2m + S2p * S2m + S4p + S2p);
  return out;
}

}  // namespace defcon
