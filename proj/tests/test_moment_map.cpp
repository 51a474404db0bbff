#include <doctest.h>

#include <cmath>
#include <numbers>

#include "common.hpp"
#include "defcon/errors.hpp"
#include "defcon/moment_map.hpp"

using namespace defcon;
using namespace testutil;

namespace {

constexpr double pi = std::numbers::pi;

// Exact integral of x^a y^b z^c over the unit sphere.
double monomial_integral(int a, int b, int c) {
  if (a % 2 || b % 2 || c % 2) return 0;
  return 2 * std::tgamma((a + 1) / 2.0) * std::tgamma((b + 1) / 2.0) * std::tgamma((c + 1) / 2.0) /
         std::tgamma((a + b + c + 3) / 2.0);
}

Field constant_curvature(const Grid& g, const Frame3<double>& F) {
  return sample(g, 2, 3, [&](const Vec4<double>&, double* v) {
    Eigen::Map<Frame3<double>> m(v);
    m = F;
  });
}

// Perfect but non-constant: conformal rescaling of the standard triple.
Field perfect_curvature(const Grid& g) {
  return sample(g, 2, 3, [&](const Vec4<double>& x, double* v) {
    Eigen::Map<Frame3<double>> m(v);
    m = (1.5 + std::sin(2 * pi * x(0))) * standard_triple<double>();
  });
}

Field random_tangent(const Grid& g) {
  Field f = zeros(g, 1, 3);
  for (long i = 0; i < f.data.size(); ++i) f.data[i] = gauss();
  return f;
}

// Standard triple mixed by M in the fibre: Q = M^T M / (tr(M^T M)/3).
Frame3<double> frame_with_Q(const Eigen::Matrix3d& Q) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(Q);
  const Eigen::Matrix3d M = es.operatorSqrt();
  return standard_triple<double>() * M;
}

}  // namespace

TEST_CASE("sphere quadrature exactness") {
  for (int deg : {6, 8, 10}) {
    const SphereQuadrature q = sphere_quadrature(deg);
    double wsum = 0;
    for (double w : q.weights) {
      CHECK(w > 0);
      wsum += w;
    }
    CHECK(wsum == doctest::Approx(4 * pi).epsilon(1e-14));
    for (size_t k = 0; k < q.nodes.size(); ++k) CHECK(std::abs(q.nodes[k].norm() - 1) < 1e-14);
    for (int a = 0; a <= deg; ++a)
      for (int b = 0; a + b <= deg; ++b)
        for (int c = 0; a + b + c <= deg; ++c) {
          double s = 0;
          for (size_t k = 0; k < q.nodes.size(); ++k)
            s += q.weights[k] * std::pow(q.nodes[k].x(), a) * std::pow(q.nodes[k].y(), b) * std::pow(q.nodes[k].z(), c);
          CHECK(std::abs(s - monomial_integral(a, b, c)) < 1e-12);
        }
  }
}

TEST_CASE("quadrature is antipodally symmetric") {
  const SphereQuadrature q = sphere_quadrature(8);
  const size_t n = q.nodes.size();
  int matched = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (q.nodes[i] == -q.nodes[j] && q.weights[i] == q.weights[j]) ++matched;
  CHECK(matched == int(n));
}

TEST_CASE("real harmonics are orthonormal") {
  const SphereQuadrature q = sphere_quadrature(8);
  for (int l1 = 0; l1 <= 4; ++l1)
    for (int m1 = -l1; m1 <= l1; ++m1)
      for (int l2 = 0; l2 <= 4; ++l2)
        for (int m2 = -l2; m2 <= l2; ++m2) {
          double s = 0;
          for (size_t k = 0; k < q.nodes.size(); ++k)
            s += q.weights[k] * real_harmonic(l1, m1, q.nodes[k]) * real_harmonic(l2, m2, q.nodes[k]);
          CHECK(std::abs(s - (l1 == l2 && m1 == m2 ? 1.0 : 0.0)) < 1e-12);
        }
}

TEST_CASE("h map") {
  const Eigen::Vector3d e3(0, 0, 1);
  CHECK(h_map(e3, e3) == doctest::Approx(1 / (2 * pi)));
  CHECK(h_map(e3, Eigen::Vector3d(1, 0, 0)) == 0);
  for (int n = 0; n < 100; ++n) {
    const Eigen::Vector3d rho = random_matrix<Eigen::Vector3d>(), q = random_matrix<Eigen::Vector3d>().normalized();
    CHECK(h_map(rho, -q) == -h_map(rho, q));
    // 2 pi h is the Hamiltonian of the rotation q -> rho x q for the area
    // form area(u, v) = <q, u x v>: 2 pi dh(v) = area(rho x q, v).
    Eigen::Vector3d v = random_matrix<Eigen::Vector3d>();
    v -= v.dot(q) * q;
    const double e = 1e-6;
    const double dh = (h_map(rho, (q + e * v).normalized()) - h_map(rho, (q - e * v).normalized())) / (2 * e);
    CHECK(2 * pi * dh == doctest::Approx(q.dot(rho.cross(q).cross(v))).epsilon(1e-7));
  }
  const SphereQuadrature quad = sphere_quadrature(8);
  const Eigen::Vector3d rho(0.3, -1.2, 0.7);
  double mean = 0;
  for (size_t k = 0; k < quad.nodes.size(); ++k) mean += quad.weights[k] * h_map(rho, quad.nodes[k]);
  CHECK(std::abs(mean) < 1e-15);
}

TEST_CASE("omega on the twistor space") {
  const Eigen::Vector3d q = Eigen::Vector3d(0.2, -0.5, 0.8).normalized();
  const OmegaZ z = omega_Z(Frame3<double>::Zero(), q);
  CHECK(z.vertical == 1);
  CHECK(z.mixed == 0);
  CHECK(z.top == 0);
  const SphereQuadrature quad = sphere_quadrature(8);
  for (int n = 0; n < 50; ++n) {
    const Frame3<double> F = random_definite_frame();
    const Eigen::Matrix3d G = gram_matrix(F);
    const double sgn = G.trace() > 0 ? 1 : -1;
    for (const auto& p : quad.nodes) {
      const OmegaZ w = omega_Z(F, p);
      CHECK(sgn * w.top > 0);
      CHECK(w.top == doctest::Approx(3 * p.dot(G * p) / (4 * pi * pi)).epsilon(1e-12));
    }
  }
  // Indefinite frame: omega^3 vanishes on the null cone of the Gram matrix.
  Frame3<double> F = standard_triple<double>();
  F.col(2) = Form2<double>(0, 0, 1, -1, 0, 0) / 1.0;
  const Eigen::Matrix3d G = gram_matrix(F);
  CHECK(G(2, 2) * G(0, 0) < 0);
  const Eigen::Vector3d null = Eigen::Vector3d(std::sqrt(-G(2, 2)), 0, std::sqrt(G(0, 0))).normalized();
  CHECK(std::abs(omega_Z(F, null).top) < 1e-14);
}

TEST_CASE("moment pairing") {
  const Grid g = periodic_grid(4, 1.0);
  const SphereQuadrature quad = sphere_quadrature(8);
  const Field perfect = perfect_curvature(g);
  for (int l = 1; l <= 4; ++l)
    for (int m = -l; m <= l; ++m) {
      const FibreFunction f = fibre_function(g, quad, [&](const Vec4<double>&, const Eigen::Vector3d& q) {
        return real_harmonic(l, m, q);
      });
      CHECK(std::abs(moment_pair(perfect, f, quad)) < 1e-12);
    }
  const FibreFunction bad = fibre_function(g, quad, [](const Vec4<double>&, const Eigen::Vector3d& q) { return q.z() * q.z(); });
  CHECK_THROWS_AS(moment_pair(perfect, bad, quad), NotMeanZeroError);

  // Q = diag(1+s, 1-s, 1), f = x^2 - y^2: pair = s mu 16 pi / 15 per unit volume.
  const FibreFunction f2 =
      fibre_function(g, quad, [](const Vec4<double>&, const Eigen::Vector3d& q) { return q.x() * q.x() - q.y() * q.y(); });
  for (double s : {0.01, 0.05, 0.1}) {
    const Frame3<double> F = frame_with_Q(Eigen::Vector3d(1 + s, 1 - s, 1).asDiagonal());
    const Field c = constant_curvature(g, F);
    const double mu = gram_matrix(F).trace() / 3;
    CHECK(moment_pair(c, f2, quad) == doctest::Approx(16 * pi * s * mu / 15).epsilon(1e-12));
    for (int m = -1; m <= 1; ++m) {
      const FibreFunction f1 = fibre_function(g, quad, [&](const Vec4<double>&, const Eigen::Vector3d& q) {
        return real_harmonic(1, m, q);
      });
      CHECK(std::abs(moment_pair(c, f1, quad)) < 1e-14);
    }
  }
}

TEST_CASE("moment pairing is linear and rotation invariant") {
  const Grid g = periodic_grid(4, 1.0);
  const SphereQuadrature quad = sphere_quadrature(8);
  const Frame3<double> F = frame_with_Q(Eigen::Vector3d(1.2, 0.9, 0.9).asDiagonal());
  const Field c = constant_curvature(g, F);
  auto pair_of = [&](const Field& cur, const Eigen::Matrix3d& R) {
    return moment_pair(cur, fibre_function(g, quad, [&](const Vec4<double>&, const Eigen::Vector3d& q) {
                         const Eigen::Vector3d p = R * q;
                         return p.x() * p.y() + 0.5 * (p.x() * p.x() - p.z() * p.z());
                       }), quad);
  };
  const double base = pair_of(c, Eigen::Matrix3d::Identity());
  CHECK(std::abs(base) > 1e-3);
  // F -> F R (fibre rotation) is matched by rotating the test function.
  const Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, -1).normalized()).toRotationMatrix();
  const Field cr = constant_curvature(g, F * R);
  // Rotated nodes are not quadrature nodes, but the integrand has degree 4.
  CHECK(pair_of(cr, R) == doctest::Approx(base).epsilon(1e-12));
  const FibreFunction f1 = fibre_function(g, quad, [](const Vec4<double>&, const Eigen::Vector3d& q) { return q.x() * q.y(); });
  const FibreFunction f2 = fibre_function(g, quad, [](const Vec4<double>&, const Eigen::Vector3d& q) { return q.z() * q.y(); });
  FibreFunction sum = f1;
  for (size_t i = 0; i < sum.values.size(); ++i) sum.values[i] = 2 * f1.values[i] - 3 * f2.values[i];
  CHECK(moment_pair(c, sum, quad) ==
        doctest::Approx(2 * moment_pair(c, f1, quad) - 3 * moment_pair(c, f2, quad)).epsilon(1e-12));
}

TEST_CASE("isotropy pairing vanishes") {
  const Grid g = periodic_grid(4, 1.0);
  const Field perfect = perfect_curvature(g);
  for (int deg : {4, 8}) {
    const SphereQuadrature quad = sphere_quadrature(deg);
    for (int n = 0; n < 5; ++n) {
      const Field a = random_tangent(g), b = random_tangent(g);
      CHECK(std::abs(isotropy_pair(perfect, a, b, quad)) < 1e-10);
      CHECK(isotropy_pair(perfect, a, a, quad) == 0);
    }
  }
}

TEST_CASE("perfect check") {
  const Grid g = periodic_grid(4, 1.0);
  const SphereQuadrature quad = sphere_quadrature(8);
  const PerfectReport p = perfect_check(perfect_curvature(g), quad);
  CHECK(p.max_variance < 1e-20);
  CHECK(p.max_moment < 1e-12);
  CHECK(p.moments.size() == 24);
  const PerfectReport r = perfect_check(constant_curvature(g, frame_with_Q(Eigen::Vector3d(1.1, 0.9, 1).asDiagonal())), quad);
  CHECK(r.max_variance > 1e-3);
  CHECK(r.max_moment > 1e-3);
  CHECK(r.detector_constant > 0);
}
