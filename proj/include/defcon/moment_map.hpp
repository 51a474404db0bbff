#pragma once
// Fibre integrals over the S^2-bundle Z -> X.
//
// A point of Z is (x, q) with q a unit vector in the fibre E_x = R^3. For an
// E-valued form a the h-map gives h(a)(q) = <a, q> / 2pi, and the symplectic
// form is omega = area_{S^2} + h(F). With mu the coefficient of
// (1/3) sum F_i ^ F_i, h(F)^2 = Q(q,q) mu / (4 pi^2) dx^0123 and
// omega^3 = 3 area ^ h(F)^2. moment_pair drops the factor 3 / (4 pi^2).

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "defcon/lattice.hpp"

namespace defcon {

struct SphereQuadrature {
  std::vector<Eigen::Vector3d> nodes;
  std::vector<double> weights;  // sum to 4 pi
  int degree = 0;               // exact on polynomials of this degree
};

// Gauss-Legendre in z times uniform azimuth; antipodally symmetric.
SphereQuadrature sphere_quadrature(int degree = 8);

// Orthonormal real spherical harmonic, m in [-l, l].
double real_harmonic(int l, int m, const Eigen::Vector3d& q);

double h_map(const Eigen::Vector3d& rho, const Eigen::Vector3d& q);
// E-valued 1-form a (4 x 3 columns per fibre index) contracted with q.
Form1<double> h_map(const Eigen::Matrix<double, 4, 3>& a, const Eigen::Vector3d& q);
Form2<double> h_map(const Frame3<double>& F, const Eigen::Vector3d& q);

struct OmegaZ {
  double vertical = 1;            // multiple of the fibre area form
  double mixed = 0;
  Form2<double> horizontal;
  double top = 0;                 // omega^3 / (area ^ dx^0123)
};
OmegaZ omega_Z(const Frame3<double>& F, const Eigen::Vector3d& q);

struct FibreFunction {
  long sites = 0;
  int nodes = 0;
  std::vector<double> values;  // [site][node]

  double& at(long s, int k) { return values[s * nodes + k]; }
  double at(long s, int k) const { return values[s * nodes + k]; }
};

FibreFunction fibre_function(const Grid& g, const SphereQuadrature& quad,
                             const std::function<double(const Vec4<double>&, const Eigen::Vector3d&)>& f);
// Largest |fibre mean| relative to the fibre mean of |f|.
double fibre_mean_defect(const FibreFunction& f, const SphereQuadrature& quad);

// sum_x sum_k w_k f(x, q_k) Q_x(q_k, q_k) mu_x dV. `curvature` has degree 2,
// fibre 3. Throws NotMeanZeroError unless f has fibrewise mean zero.
double moment_pair(const Field& curvature, const FibreFunction& f, const SphereQuadrature& quad);

// Omega(h(a), h(b)) = int_Z h(a) ^ h(b) ^ omega^2, a and b of degree 1.
double isotropy_pair(const Field& curvature, const Field& a, const Field& b, const SphereQuadrature& quad);

struct PerfectReport {
  double max_variance = 0;       // sup over sites of the fibre variance of Q(q,q)
  std::vector<int> l, m;         // harmonic test basis
  std::vector<double> moments;   // moment_pair per basis element
  double max_moment = 0;
  double detector_constant = 0;  // max_moment / sqrt(max_variance), 0 when perfect
};
PerfectReport perfect_check(const Field& curvature, const SphereQuadrature& quad, int max_l = 4);

}  // namespace defcon
