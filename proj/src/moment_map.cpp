#include "defcon/moment_map.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "defcon/errors.hpp"

namespace defcon {

namespace {

constexpr double pi = std::numbers::pi;

Frame3<double> frame_at(const Field& f, long s) { return Eigen::Map<const Frame3<double>>(f.at(s)); }

// Q(q,q) mu from the wedge Gram matrix: sum_ij q_i q_j F_i ^ F_j.
double qq_mu(const Frame3<double>& F, const Eigen::Vector3d& q) { return q.dot(gram_matrix(F) * q); }

void check_curvature(const Field& c) {
  if (c.degree != 2 || c.fibre != 3) throw Error("curvature field must be an E-valued 2-form");
}

}  // namespace

SphereQuadrature sphere_quadrature(int degree) {
  if (degree < 0) throw Error("negative quadrature degree");
  const int n = degree / 2 + 1;            // 2n - 1 >= degree
  const int m = 2 * ((degree + 2) / 2);    // even, > degree
  // Golub-Welsch for Gauss-Legendre on [-1, 1].
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  // Mirror nodes and weights so that q -> -q is an exact symmetry.
  std::vector<double> z(n), wz(n);
  for (int i = 0; i < n; ++i) {
    z[i] = 0.5 * (es.eigenvalues()(i) - es.eigenvalues()(n - 1 - i));
    wz[i] = std::pow(es.eigenvectors()(0, i), 2) + std::pow(es.eigenvectors()(0, n - 1 - i), 2);
  }
  SphereQuadrature quad;
  quad.degree = degree;
  quad.nodes.resize(size_t(n) * m);
  quad.weights.resize(size_t(n) * m);
  for (int i = 0; i < n; ++i) {
    const double r = std::sqrt(std::max(0.0, 1 - z[i] * z[i]));
    for (int j = 0; j < m / 2; ++j) {
      const double phi = 2 * pi * j / m;
      const Eigen::Vector3d q(r * std::cos(phi), r * std::sin(phi), z[i]);
      quad.nodes[i * m + j] = q;
      quad.nodes[(n - 1 - i) * m + j + m / 2] = -q;
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) quad.weights[i * m + j] = wz[i] * 2 * pi / m;
  return quad;
}

double real_harmonic(int l, int m, const Eigen::Vector3d& q) {
  if (std::abs(m) > l) throw Error("harmonic order out of range");
  const double theta = std::acos(std::clamp(q.z() / q.norm(), -1.0, 1.0));
  const double phi = std::atan2(q.y(), q.x());
  const double p = std::sph_legendre(l, std::abs(m), theta);
  if (m == 0) return p;
  return std::sqrt(2.0) * p * (m > 0 ? std::cos(m * phi) : std::sin(-m * phi));
}

double h_map(const Eigen::Vector3d& rho, const Eigen::Vector3d& q) { return rho.dot(q) / (2 * pi); }

Form1<double> h_map(const Eigen::Matrix<double, 4, 3>& a, const Eigen::Vector3d& q) { return a * q / (2 * pi); }

Form2<double> h_map(const Frame3<double>& F, const Eigen::Vector3d& q) { return F * q / (2 * pi); }

OmegaZ omega_Z(const Frame3<double>& F, const Eigen::Vector3d& q) {
  OmegaZ w;
  w.horizontal = h_map(F, q);
  w.top = 3 * wedge_pair<double>(w.horizontal, w.horizontal);
  return w;
}

FibreFunction fibre_function(const Grid& g, const SphereQuadrature& quad,
                             const std::function<double(const Vec4<double>&, const Eigen::Vector3d&)>& f) {
  FibreFunction r;
  r.sites = g.sites();
  r.nodes = int(quad.nodes.size());
  r.values.resize(r.sites * r.nodes);
  for (long s = 0; s < r.sites; ++s) {
    const Vec4<double> x = g.position(s);
    for (int k = 0; k < r.nodes; ++k) r.at(s, k) = f(x, quad.nodes[k]);
  }
  return r;
}

double fibre_mean_defect(const FibreFunction& f, const SphereQuadrature& quad) {
  double worst = 0;
  for (long s = 0; s < f.sites; ++s) {
    double m = 0, a = 0;
    for (int k = 0; k < f.nodes; ++k) {
      m += quad.weights[k] * f.at(s, k);
      a += quad.weights[k] * std::abs(f.at(s, k));
    }
    if (a > 0) worst = std::max(worst, std::abs(m) / a);
  }
  return worst;
}

double moment_pair(const Field& curvature, const FibreFunction& f, const SphereQuadrature& quad) {
  check_curvature(curvature);
  if (f.sites != curvature.grid.sites() || f.nodes != int(quad.nodes.size()))
    throw Error("fibre function does not match the grid and quadrature");
  if (fibre_mean_defect(f, quad) > 1e-12) throw NotMeanZeroError("test function is not fibrewise mean zero");
  double total = 0;
  for (long s = 0; s < f.sites; ++s) {
    const Frame3<double> F = frame_at(curvature, s);
    for (int k = 0; k < f.nodes; ++k) total += quad.weights[k] * f.at(s, k) * qq_mu(F, quad.nodes[k]);
  }
  return total * curvature.grid.cell_volume();
}

double isotropy_pair(const Field& curvature, const Field& a, const Field& b, const SphereQuadrature& quad) {
  check_curvature(curvature);
  if (a.degree != 1 || b.degree != 1 || a.fibre != 3 || b.fibre != 3) throw Error("tangents must be E-valued 1-forms");
  double total = 0;
  for (long s = 0; s < curvature.grid.sites(); ++s) {
    const Frame3<double> F = frame_at(curvature, s);
    const Eigen::Matrix<double, 4, 3> as = Eigen::Map<const Eigen::Matrix<double, 4, 3>>(a.at(s));
    const Eigen::Matrix<double, 4, 3> bs = Eigen::Map<const Eigen::Matrix<double, 4, 3>>(b.at(s));
    for (size_t k = 0; k < quad.nodes.size(); ++k) {
      const Eigen::Vector3d& q = quad.nodes[k];
      const Form2<double> ab = wedge<1, 1>(h_map(as, q), h_map(bs, q));
      // omega^2 = 2 area ^ h(F) + h(F)^2; only the first has a fibre part.
      total += quad.weights[k] * 2 * wedge<2, 2>(ab, h_map(F, q))(0);
    }
  }
  return total * curvature.grid.cell_volume();
}

PerfectReport perfect_check(const Field& curvature, const SphereQuadrature& quad, int max_l) {
  check_curvature(curvature);
  const Grid& g = curvature.grid;
  PerfectReport r;
  for (long s = 0; s < g.sites(); ++s) {
    const Frame3<double> F = frame_at(curvature, s);
    const double mu = gram_matrix(F).trace() / 3;
    double var = 0;
    for (size_t k = 0; k < quad.nodes.size(); ++k) var += quad.weights[k] * std::pow(qq_mu(F, quad.nodes[k]) / mu - 1, 2);
    r.max_variance = std::max(r.max_variance, var / (4 * pi));
  }
  for (int l = 1; l <= max_l; ++l)
    for (int m = -l; m <= l; ++m) {
      const FibreFunction f =
          fibre_function(g, quad, [&](const Vec4<double>&, const Eigen::Vector3d& q) { return real_harmonic(l, m, q); });
      r.l.push_back(l);
      r.m.push_back(m);
      r.moments.push_back(moment_pair(curvature, f, quad));
      r.max_moment = std::max(r.max_moment, std::abs(r.moments.back()));
    }
  if (r.max_variance > 0) r.detector_constant = r.max_moment / std::sqrt(r.max_variance);
  return r;
}

}  // namespace defcon
