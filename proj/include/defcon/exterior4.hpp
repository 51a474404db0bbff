#pragma once
// Pointwise exterior algebra on R^4.
//
// p-forms are Eigen column vectors of length C(4,p) in lexicographic basis:
//   1-forms  dx0, dx1, dx2, dx3
//   2-forms  01, 02, 03, 12, 13, 23
//   3-forms  012, 013, 023, 123
//   4-forms  0123
// The coordinate basis is declared orthonormal for the Euclidean metric, so
// |dx0^dx1 + dx2^dx3|^2 = 2.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

#include "defcon/errors.hpp"

namespace defcon {

constexpr int binom4(int p) { return p == 0 || p == 4 ? 1 : (p == 2 ? 6 : 4); }

template <class S, int P>
using Form = Eigen::Matrix<S, binom4(P), 1>;
template <class S> using Form1 = Form<S, 1>;
template <class S> using Form2 = Form<S, 2>;
template <class S> using Form3 = Form<S, 3>;
template <class S> using Form4 = Form<S, 4>;
template <class S> using Vec4 = Eigen::Matrix<S, 4, 1>;
template <class S> using Mat4 = Eigen::Matrix<S, 4, 4>;
template <class S> using SymMat3 = Eigen::Matrix<S, 3, 3>;
// Columns are the three 2-forms of the frame.
template <class S> using Frame3 = Eigen::Matrix<S, 6, 3>;

template <class S>
struct Metric4 {
  Mat4<S> g = Mat4<S>::Identity();
  int orientation = 1;
};

enum class Definiteness { PositiveDefinite, NegativeDefinite, NotDefinite };

namespace detail {

struct Basis {
  int n;
  std::array<std::array<int, 4>, 6> idx;
};

constexpr Basis basis(int p) {
  switch (p) {
    case 0: return {1, {{{0, 0, 0, 0}}}};
    case 1: return {4, {{{0}, {1}, {2}, {3}}}};
    case 2: return {6, {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}}};
    case 3: return {4, {{{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}}}};
    default: return {1, {{{0, 1, 2, 3}}}};
  }
}

// Sign of the permutation sorting v[0..n), or 0 if an index repeats.
inline int perm_sign(const int* v, int n) {
  int s = 1;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (v[i] == v[j]) return 0;
      if (v[i] > v[j]) s = -s;
    }
  return s;
}

// Position of a sorted index set in the basis of its degree.
inline int index_of(const int* sorted, int p) {
  const Basis b = basis(p);
  for (int k = 0; k < b.n; ++k) {
    bool eq = true;
    for (int m = 0; m < p; ++m) eq = eq && b.idx[k][m] == sorted[m];
    if (eq) return k;
  }
  return -1;
}

template <class S, int P>
S minor_det(const Mat4<S>& m, const std::array<int, 4>& r, const std::array<int, 4>& c) {
  if constexpr (P == 0) {
    return S(1);
  } else {
    Eigen::Matrix<S, P, P> sub;
    for (int i = 0; i < P; ++i)
      for (int j = 0; j < P; ++j) sub(i, j) = m(r[i], c[j]);
    return sub.determinant();
  }
}

}  // namespace detail

// Gram matrix of the induced inner product on p-forms: <a,b>_g = a^T H b.
template <int P, class S>
Eigen::Matrix<S, binom4(P), binom4(P)> form_metric(const Metric4<S>& g) {
  const Mat4<S> gi = g.g.inverse();
  constexpr detail::Basis b = detail::basis(P);
  Eigen::Matrix<S, binom4(P), binom4(P)> h;
  for (int i = 0; i < b.n; ++i)
    for (int k = 0; k < b.n; ++k) h(i, k) = detail::minor_det<S, P>(gi, b.idx[i], b.idx[k]);
  return h;
}

template <int P, class S>
S inner(const Metric4<S>& g, const Form<S, P>& a, const Form<S, P>& b) {
  return a.dot(form_metric<P>(g) * b);
}

template <int P, int R, class S>
Form<S, P + R> wedge(const Form<S, P>& a, const Form<S, R>& b) {
  static_assert(P + R <= 4);
  constexpr detail::Basis ba = detail::basis(P), bb = detail::basis(R);
  Form<S, P + R> out = Form<S, P + R>::Zero();
  for (int i = 0; i < ba.n; ++i)
    for (int k = 0; k < bb.n; ++k) {
      int v[4];
      for (int m = 0; m < P; ++m) v[m] = ba.idx[i][m];
      for (int m = 0; m < R; ++m) v[P + m] = bb.idx[k][m];
      const int s = detail::perm_sign(v, P + R);
      if (s == 0) continue;
      int sorted[4];
      std::copy(v, v + P + R, sorted);
      std::sort(sorted, sorted + P + R);
      out(detail::index_of(sorted, P + R)) += S(s) * a(i) * b(k);
    }
  return out;
}

template <int P, class S>
Form<S, 4 - P> hodge_star(const Metric4<S>& g, const Form<S, P>& w) {
  const Form<S, P> raised = form_metric<P>(g) * w;
  const S vol = S(g.orientation) * std::sqrt(g.g.determinant());
  constexpr detail::Basis bi = detail::basis(P), bo = detail::basis(4 - P);
  Form<S, 4 - P> out = Form<S, 4 - P>::Zero();
  for (int j = 0; j < bo.n; ++j)
    for (int i = 0; i < bi.n; ++i) {
      int v[4];
      for (int m = 0; m < P; ++m) v[m] = bi.idx[i][m];
      for (int m = 0; m < 4 - P; ++m) v[P + m] = bo.idx[j][m];
      const int s = detail::perm_sign(v, 4);
      if (s != 0) out(j) += S(s) * vol * raised(i);
    }
  return out;
}

template <int P, class S>
Form<S, P - 1> interior(const Vec4<S>& u, const Form<S, P>& w) {
  static_assert(P >= 1);
  constexpr detail::Basis bo = detail::basis(P - 1);
  Form<S, P - 1> out = Form<S, P - 1>::Zero();
  for (int j = 0; j < bo.n; ++j)
    for (int mu = 0; mu < 4; ++mu) {
      int v[4];
      v[0] = mu;
      for (int m = 0; m < P - 1; ++m) v[1 + m] = bo.idx[j][m];
      const int s = detail::perm_sign(v, P);
      if (s == 0) continue;
      int sorted[4];
      std::copy(v, v + P, sorted);
      std::sort(sorted, sorted + P);
      out(j) += S(s) * u(mu) * w(detail::index_of(sorted, P));
    }
  return out;
}

// Coefficient of dx0^dx1^dx2^dx3 in a^b.
template <class S>
S wedge_pair(const Form2<S>& a, const Form2<S>& b) {
  return a(0) * b(5) - a(1) * b(4) + a(2) * b(3) + a(3) * b(2) - a(4) * b(1) + a(5) * b(0);
}

// Euclidean Hodge star on 2-forms; also the map X -> X~ with wedge_pair(a,b) = a.dot(b~).
template <class S>
Form2<S> wedge_dual(const Form2<S>& a) {
  Form2<S> r;
  r << a(5), -a(4), a(3), a(2), -a(1), a(0);
  return r;
}

template <class S>
Mat4<S> as_matrix(const Form2<S>& w) {
  Mat4<S> m = Mat4<S>::Zero();
  constexpr detail::Basis b = detail::basis(2);
  for (int k = 0; k < 6; ++k) {
    m(b.idx[k][0], b.idx[k][1]) = w(k);
    m(b.idx[k][1], b.idx[k][0]) = -w(k);
  }
  return m;
}

template <class S>
Form2<S> from_matrix(const Mat4<S>& m) {
  Form2<S> w;
  constexpr detail::Basis b = detail::basis(2);
  for (int k = 0; k < 6; ++k) w(k) = S(0.5) * (m(b.idx[k][0], b.idx[k][1]) - m(b.idx[k][1], b.idx[k][0]));
  return w;
}

template <class S>
SymMat3<S> gram_matrix(const Frame3<S>& f) {
  SymMat3<S> G;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) G(i, j) = G(j, i) = wedge_pair<S>(f.col(i), f.col(j));
  return G;
}

template <class S>
Frame3<S> standard_triple() {
  Frame3<S> f = Frame3<S>::Zero();
  f(0, 0) = 1; f(5, 0) = 1;
  f(1, 1) = 1; f(4, 1) = -1;
  f(2, 2) = 1; f(3, 2) = 1;
  return f;
}

// Conformal metric making the frame self-dual, normalised to det = 1 and
// positive definite. Throws NotDefiniteError when the contraction degenerates.
template <class S>
Mat4<S> conformal_metric(const Frame3<S>& f) {
  std::array<Mat4<S>, 3> w, sw;
  for (int i = 0; i < 3; ++i) {
    w[i] = as_matrix<S>(f.col(i));
    sw[i] = as_matrix<S>(wedge_dual<S>(f.col(i)));
  }
  static constexpr int perms[6][4] = {{0, 1, 2, 1}, {1, 2, 0, 1}, {2, 0, 1, 1},
                                      {0, 2, 1, -1}, {2, 1, 0, -1}, {1, 0, 2, -1}};
  Mat4<S> U = Mat4<S>::Zero();
  for (const auto& p : perms) U += S(p[3]) * w[p[0]] * sw[p[2]] * w[p[1]].transpose();
  U = S(0.5) * (U + U.transpose());
  const S scale = U.cwiseAbs().maxCoeff();
  const S det = U.determinant();
  if (!(scale > S(0)) || std::abs(det) < S(1e-14) * scale * scale * scale * scale)
    throw NotDefiniteError("frame does not span a definite 3-plane");
  // Cholesky succeeds exactly on (numerically) positive definite matrices.
  S sgn;
  if (Eigen::LLT<Mat4<S>>(U).info() == Eigen::Success) sgn = S(1);
  else if (Eigen::LLT<Mat4<S>>(-U).info() == Eigen::Success) sgn = S(-1);
  else throw NotDefiniteError("frame does not span a definite 3-plane");
  U *= sgn;
  return U / std::pow(U.determinant(), S(0.25));
}

// Orientation test of the frame inside the so(4) it spans: sign of <[M1,M2],M3>
// with M_i = g^{-1} F_i. Positive for the curvature frame of the round S^4.
template <class S>
int frame_orientation(const Frame3<S>& f, const Mat4<S>& g) {
  const Mat4<S> gi = g.inverse();
  const Mat4<S> m1 = gi * as_matrix<S>(f.col(0)), m2 = gi * as_matrix<S>(f.col(1)),
                m3 = gi * as_matrix<S>(f.col(2));
  const Mat4<S> c = m1 * m2 - m2 * m1;
  const S t = -(c * m3).trace();
  return t > S(0) ? 1 : (t < S(0) ? -1 : 0);
}

template <class S>
bool is_definite(const SymMat3<S>& G, int orient) {
  return Eigen::LLT<SymMat3<S>>(S(orient) * G).info() == Eigen::Success;
}

template <class S>
Definiteness classify(const Frame3<S>& f, int orient = 1) {
  if (!is_definite<S>(gram_matrix(f), orient)) return Definiteness::NotDefinite;
  Mat4<S> g;
  try {
    g = conformal_metric(f);
  } catch (const NotDefiniteError&) {
    return Definiteness::NotDefinite;
  }
  const int s = frame_orientation(f, g);
  if (s == 0) return Definiteness::NotDefinite;
  return s > 0 ? Definiteness::PositiveDefinite : Definiteness::NegativeDefinite;
}

// Metric whose self-dual forms are the span of f. With mu = (1/3) sum f_i^f_i the
// Riemannian volume form of the result is vol/2, so the standard triple with
// vol = 2 gives the Euclidean metric.
template <class S>
Metric4<S> reconstruct_metric(const Frame3<S>& f, S vol) {
  if (!(vol > S(0))) throw DegenerateVolumeError("volume form must be positive");
  const SymMat3<S> G = gram_matrix(f);
  int orient;
  if (is_definite<S>(G, 1)) orient = 1;
  else if (is_definite<S>(G, -1)) orient = -1;
  else throw NotDefiniteError("frame does not span a definite 3-plane");
  Metric4<S> m;
  m.g = conformal_metric(f) * std::sqrt(vol / S(2));
  m.orientation = orient;
  return m;
}

template <class S>
S mu_of(const Frame3<S>& f) {
  return gram_matrix(f).trace() / S(3);
}

template <class S>
std::pair<Form2<S>, Form2<S>> sd_split(const Metric4<S>& g, const Form2<S>& w) {
  const Form2<S> sw = hodge_star<2>(g, w);
  return {S(0.5) * (w + sw), S(0.5) * (w - sw)};
}

template <class S>
Form1<S> j_map(const Metric4<S>& g, const Form2<S>& theta, const Form1<S>& alpha) {
  const Form2<S> st = hodge_star<2>(g, theta);
  if ((st - theta).norm() > S(1e-10) * (S(1) + theta.norm()))
    throw NotSelfDualError("theta is not self-dual for the given metric");
  return hodge_star<3>(g, wedge<1, 2>(alpha, theta));
}

// Connection 1-forms alpha_i of the torsion-free metric connection on Lambda^+
// in the orthonormal self-dual frame theta (|theta_i|^2 = 2), given d theta_i.
// Columns of the result are alpha_1..alpha_3; the covariant derivative of a
// section s = s_i theta_i is ds + alpha x s.
template <class S>
Eigen::Matrix<S, 4, 3> connection_from_frame(const Metric4<S>& g, const Frame3<S>& theta,
                                             const Eigen::Matrix<S, 4, 3>& dtheta) {
  std::array<Form1<S>, 3> sd;
  for (int i = 0; i < 3; ++i) sd[i] = hodge_star<3>(g, Form3<S>(dtheta.col(i)));
  auto J = [&](int i, const Form1<S>& a) { return j_map<S>(g, theta.col(i), a); };
  Eigen::Matrix<S, 4, 3> alpha;
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    alpha.col(i) = S(0.5) * (J(j, sd[k]) - J(k, sd[j]) - sd[i]);
  }
  return alpha;
}

}  // namespace defcon
