#include <doctest.h>

#include "common.hpp"

using namespace defcon;
using namespace testutil;

namespace {

Form2<double> e2(int k) { return Form2<double>::Unit(k); }
Form1<double> e1(int k) { return Form1<double>::Unit(k); }

}  // namespace

TEST_CASE("wedge pairing on basis elements") {
  Form2<double> sd = e2(0) + e2(5), asd = e2(0) - e2(5);
  CHECK(wedge_pair<double>(sd, sd) == 2.0);
  CHECK(wedge_pair<double>(e2(0), e2(1)) == 0.0);
  CHECK(wedge_pair<double>(asd, asd) == -2.0);
  for (int t = 0; t < 50; ++t) {
    Form2<double> a = random_form2(), b = random_form2();
    CHECK(wedge_pair<double>(a, b) == doctest::Approx(wedge_pair<double>(b, a)));
    CHECK(wedge_pair<double>(a, b) == doctest::Approx(wedge<2, 2>(a, b)(0)));
  }
}

TEST_CASE("wedge pairing has signature (3,3)") {
  Eigen::Matrix<double, 6, 6> W;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) W(i, j) = wedge_pair<double>(e2(i), e2(j));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(W);
  int pos = 0, neg = 0;
  for (int i = 0; i < 6; ++i) (es.eigenvalues()(i) > 0 ? pos : neg)++;
  CHECK(pos == 3);
  CHECK(neg == 3);
}

TEST_CASE("gram matrix examples") {
  const Frame3<double> s = standard_triple<double>();
  CHECK((gram_matrix(s) - 2.0 * Eigen::Matrix3d::Identity()).norm() == 0.0);
  Frame3<double> a = s;
  a(5, 0) = -1; a(4, 1) = 1; a(3, 2) = -1;
  CHECK((gram_matrix(a) + 2.0 * Eigen::Matrix3d::Identity()).norm() == 0.0);
  Frame3<double> m = s;
  m.col(2) = s.col(1) + s.col(2);
  Eigen::Matrix3d expect;
  expect << 2, 0, 0, 0, 2, 2, 0, 2, 4;
  CHECK((gram_matrix(m) - expect).norm() == 0.0);
}

TEST_CASE("so(4) commutators of the standard triple") {
  const Frame3<double> s = standard_triple<double>();
  const Mat4<double> w1 = as_matrix<double>(s.col(0)), w2 = as_matrix<double>(s.col(1)),
                     w3 = as_matrix<double>(s.col(2));
  CHECK((w1 * w2 - w2 * w1 + 2.0 * w3).norm() == 0.0);
  CHECK((w1 * w1 + Mat4<double>::Identity()).norm() == 0.0);
}

TEST_CASE("classify") {
  const Frame3<double> s = standard_triple<double>();
  // The standard triple is negatively oriented under the commutator test; its
  // negative is the curvature frame of the round S^4 at the origin.
  CHECK(classify<double>(s, 1) == Definiteness::NegativeDefinite);
  CHECK(classify<double>(Frame3<double>(-s), 1) == Definiteness::PositiveDefinite);
  Frame3<double> t = s;
  t.col(2) = e2(2) - e2(3);
  CHECK(classify<double>(t, 1) == Definiteness::NotDefinite);
  Frame3<double> sw = s;
  sw.col(1) = s.col(2);
  sw.col(2) = s.col(1);
  CHECK(classify<double>(sw, 1) == Definiteness::PositiveDefinite);
  CHECK(classify<double>(s, -1) == Definiteness::NotDefinite);
  Frame3<double> f3 = -s;
  f3.col(2) = s.col(2);
  CHECK(classify<double>(f3, 1) == Definiteness::NegativeDefinite);
}

TEST_CASE("classify is invariant under orientation preserving linear maps") {
  for (int t = 0; t < 100; ++t) {
    const Frame3<double> f = random_definite_frame();
    const Mat4<double> L = random_gl4_positive();
    CHECK(classify<double>(f, 1) == classify<double>(push_forward(L, f), 1));
  }
}

TEST_CASE("reconstruct_metric") {
  const Frame3<double> s = standard_triple<double>();
  SUBCASE("standard triple, vol 2") {
    Metric4<double> g = reconstruct_metric<double>(s, 2.0);
    CHECK((g.g - Mat4<double>::Identity()).norm() < 1e-14);
    CHECK(g.orientation == 1);
  }
  SUBCASE("volume scaling is conformal") {
    for (double lam : {0.5, 2.0, 3.7}) {
      Metric4<double> g = reconstruct_metric<double>(s, 2.0 * lam * lam);
      CHECK((g.g - lam * Mat4<double>::Identity()).norm() < 1e-13 * lam);
    }
  }
  SUBCASE("push-forward equivariance") {
    for (int t = 0; t < 200; ++t) {
      const Mat4<double> L = random_gl4_positive();
      const Mat4<double> Li = L.inverse();
      Metric4<double> g = reconstruct_metric<double>(push_forward(L, s), 2.0 * Li.determinant());
      const Mat4<double> expect = Li.transpose() * Li;
      CHECK((g.g - expect).norm() < 1e-10 * expect.norm());
    }
  }
  SUBCASE("self-duality and volume on random frames") {
    for (int t = 0; t < 300; ++t) {
      const Frame3<double> f = random_definite_frame();
      const double vol = std::abs(mu_of(f));
      Metric4<double> g = reconstruct_metric<double>(f, vol);
      CHECK(std::sqrt(g.g.determinant()) == doctest::Approx(vol / 2).epsilon(1e-12));
      Eigen::SelfAdjointEigenSolver<Mat4<double>> es(g.g);
      const double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
      for (int i = 0; i < 3; ++i) {
        const Form2<double> w = f.col(i);
        auto [p, m] = sd_split(g, w);
        CHECK((p - w).norm() < 1e-12 * cond * w.norm());
      }
      // Any orthonormal SD frame has Gram proportional to the identity.
      Eigen::Matrix<double, 6, 6> H = form_metric<2>(g);
      Eigen::Matrix3d C = f.transpose() * H * f;
      Eigen::LLT<Eigen::Matrix3d> llt(C);
      Frame3<double> on = f * Eigen::Matrix3d(llt.matrixU()).inverse() * std::sqrt(2.0);
      Eigen::Matrix3d G = gram_matrix(on);
      const double lam = G.trace() / 3;
      CHECK((G - lam * Eigen::Matrix3d::Identity()).norm() < 1e-10 * std::abs(lam));
    }
  }
  SUBCASE("errors") {
    Frame3<double> t = s;
    t.col(2) = e2(2) - e2(3);
    CHECK_THROWS_AS(reconstruct_metric<double>(t, 1.0), NotDefiniteError);
    CHECK_THROWS_AS(reconstruct_metric<double>(s, 0.0), DegenerateVolumeError);
    Frame3<double> deg = s;
    deg.col(2) = s.col(1);
    CHECK_THROWS_AS(reconstruct_metric<double>(deg, 1.0), NotDefiniteError);
  }
}

TEST_CASE("hodge star") {
  Metric4<double> eu;
  CHECK((hodge_star<2>(eu, e2(0)) - e2(5)).norm() == 0.0);
  CHECK((hodge_star<1>(eu, e1(0)) - Form3<double>::Unit(3)).norm() == 0.0);
  Metric4<double> d;
  d.g = Eigen::Vector4d(4, 1, 1, 1).asDiagonal();
  CHECK((hodge_star<2>(d, e2(0)) - 0.5 * e2(5)).norm() < 1e-15);
  for (int t = 0; t < 100; ++t) {
    Metric4<double> g;
    Mat4<double> L = random_gl4_positive();
    g.g = L.transpose() * L;
    const double vol = std::sqrt(g.g.determinant());
    // Round-off grows with the conditioning of the induced metric on forms,
    // which is cond(g)^2 on 2-forms.
    Eigen::SelfAdjointEigenSolver<Mat4<double>> es(g.g);
    const double kappa = es.eigenvalues()(3) / es.eigenvalues()(0);
    const double tol = 1e-14 * kappa * kappa;
    Form2<double> a = random_form2(), b = random_form2();
    Form2<double> sb = hodge_star<2>(g, b);
    CHECK((hodge_star<2>(g, sb) - b).norm() < tol * b.norm());
    CHECK(wedge_pair<double>(a, sb) == doctest::Approx(inner<2>(g, a, b) * vol).epsilon(1e-10));
    CHECK(inner<2>(g, sb, sb) == doctest::Approx(inner<2>(g, b, b)).epsilon(1e-10));
    Form1<double> x = random_form1(), y = random_form1();
    CHECK(wedge<1, 3>(x, hodge_star<1>(g, y))(0) == doctest::Approx(inner<1>(g, x, y) * vol).epsilon(1e-10));
    CHECK((hodge_star<3>(g, hodge_star<1>(g, x)) + x).norm() < tol * x.norm());
  }
}

TEST_CASE("self-dual splitting") {
  Metric4<double> eu;
  auto [p, m] = sd_split(eu, e2(0));
  CHECK((p - 0.5 * (e2(0) + e2(5))).norm() == 0.0);
  CHECK((m - 0.5 * (e2(0) - e2(5))).norm() == 0.0);
  Form2<double> w1 = standard_triple<double>().col(0);
  auto [p1, m1] = sd_split(eu, w1);
  CHECK((p1 - w1).norm() == 0.0);
  CHECK(m1.norm() == 0.0);
  for (int t = 0; t < 50; ++t) {
    Form2<double> w = random_form2();
    auto [a, b] = sd_split(eu, w);
    CHECK(w.squaredNorm() == doctest::Approx(a.squaredNorm() + b.squaredNorm()));
  }
}

TEST_CASE("almost complex structures from self-dual forms") {
  Metric4<double> eu;
  const Frame3<double> s = standard_triple<double>();
  CHECK((j_map<double>(eu, s.col(0), e1(0)) - e1(1)).norm() == 0.0);
  const Frame3<double> th = s;
  for (int t = 0; t < 100; ++t) {
    Form1<double> a = random_form1();
    for (int i = 0; i < 3; ++i) {
      Form1<double> ja = j_map<double>(eu, th.col(i), a);
      CHECK(ja.dot(a) == doctest::Approx(0.0).epsilon(1e-12).scale(a.squaredNorm()));
      CHECK(ja.norm() == doctest::Approx(a.norm()));
      CHECK((j_map<double>(eu, th.col(i), ja) + a).norm() < 1e-12 * a.norm());
    }
    Form1<double> j12 = j_map<double>(eu, th.col(0), j_map<double>(eu, th.col(1), a));
    CHECK((j12 - j_map<double>(eu, th.col(2), a)).norm() < 1e-12 * a.norm());
  }
  CHECK_THROWS_AS(j_map<double>(eu, e2(0), e1(0)), NotSelfDualError);
}

TEST_CASE("interior product") {
  Vec4<double> d0 = Vec4<double>::Unit(0), d2 = Vec4<double>::Unit(2);
  CHECK((interior<2>(d0, e2(0)) - e1(1)).norm() == 0.0);
  CHECK(interior<2>(d2, e2(0)).norm() == 0.0);
  for (int t = 0; t < 50; ++t) {
    Vec4<double> u = random_vec4();
    Form1<double> a = random_form1(), b = random_form1();
    Form1<double> lhs = interior<2>(u, wedge<1, 1>(a, b));
    CHECK((lhs - (a.dot(u) * b - b.dot(u) * a)).norm() < 1e-12 * (1 + lhs.norm()));
    Form2<double> w = random_form2();
    CHECK(interior<1>(u, interior<2>(u, w))(0) == doctest::Approx(0.0).scale(w.norm() * u.squaredNorm()));
    Form3<double> c = random_matrix<Form3<double>>();
    CHECK(interior<2>(u, interior<3>(u, c)).norm() < 1e-12 * c.norm() * u.squaredNorm());
  }
}

TEST_CASE("four-dimensional self-dual identity") {
  // (a ^ i_u b1, b2) + (a ^ i_u b2, b1) = (b1, b2) a(u) for self-dual b1, b2.
  const Frame3<double> s = standard_triple<double>();
  Metric4<double> eu;
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    Form2<double> b1 = s * random_matrix<Eigen::Vector3d>(), b2 = s * random_matrix<Eigen::Vector3d>();
    Form1<double> a = random_form1();
    Vec4<double> u = random_vec4();
    const double lhs = inner<2>(eu, wedge<1, 1>(a, interior<2>(u, b1)), b2) +
                       inner<2>(eu, wedge<1, 1>(a, interior<2>(u, b2)), b1) - inner<2>(eu, b1, b2) * a.dot(u);
    const double scale = b1.norm() * b2.norm() * a.norm() * u.norm();
    worst = std::max(worst, std::abs(lhs) / scale);
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("connection of the round sphere in the conformal chart") {
  // theta_i = W^2 w_i with W^2 = 4/(1+r^2)^2 is orthonormal for g = W^2 delta.
  // The Levi-Civita connection on Lambda^+ is alpha_i = J_i(d phi), phi = log 2 - log(1+r^2).
  const Frame3<double> th0 = standard_triple<double>();
  for (int t = 0; t < 50; ++t) {
    Vec4<double> x = 0.7 * random_vec4();
    const double r2 = x.squaredNorm(), W2 = 4 / ((1 + r2) * (1 + r2));
    Metric4<double> g;
    g.g = W2 * Mat4<double>::Identity();
    Frame3<double> th = W2 * th0;
    Form1<double> dW2 = -16.0 / std::pow(1 + r2, 3) * x;
    Eigen::Matrix<double, 4, 3> dth;
    for (int i = 0; i < 3; ++i) dth.col(i) = wedge<1, 2>(dW2, Form2<double>(th0.col(i)));
    auto alpha = connection_from_frame(g, th, dth);
    Form1<double> dphi = -2.0 / (1 + r2) * x;
    Metric4<double> eu;
    for (int i = 0; i < 3; ++i) {
      Form1<double> expect = j_map<double>(eu, th0.col(i), dphi);
      CHECK((Form1<double>(alpha.col(i)) - expect).norm() < 1e-12 * (1 + expect.norm()));
    }
  }
}
