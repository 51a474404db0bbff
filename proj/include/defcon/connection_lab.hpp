#pragma once
// Definite SO(3) connections on a frozen-boundary chart: curvature, Q, mu,
// the energy E = int tr(Q^2) mu, the three flows and the round S^4 background.
//
// An so(3)-valued p-form field has fibre 3; the bracket is the cross product,
// d_A s = ds + A x s and F_A = dA + (1/2)[A ^ A].

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "defcon/errors.hpp"
#include "defcon/lattice.hpp"

namespace defcon {

using So3 = Eigen::Vector3d;

inline So3 so3_bracket(const So3& a, const So3& b) { return a.cross(b); }

struct ConnState {
  Field background;  // A-hat, degree 1, fibre 3
  Field a;           // perturbation, zero on the frozen layer
};

// Refuses periodic grids: a 4-torus carries no definite connection.
ConnState make_conn_state(const Field& background, const Field& a);
ConnState make_conn_state(const Field& background);
Field current_connection(const ConnState& s);

// [A ^ x]^i = eps_ijk A^j ^ x^k for an so(3)-valued form x of degree 0..2.
Field bracket(const Field& A, const Field& x);
// Site-wise l2 transpose of x -> [A ^ x].
Field bracket_transpose(const Field& A, const Field& y, int degree);
Field covariant_d(const Field& A, const Field& x);
Field covariant_d_transpose(const Field& A, const Field& y, int degree);
// Mass adjoint of covariant_d under g.
Field covariant_codifferential(const Field& A, const Field& y, const MetricField& g);

Field curvature(const Field& A);

struct CurvatureData {
  std::vector<Eigen::Matrix3d> Q;
  Field mu;                  // degree 4
  std::vector<int> sign;     // +1 / -1, 0 where not definite
  std::vector<long> not_definite;
};
CurvatureData q_mu_sign(const Field& F);

// Metric g_A with dvol = mu / 2; throws EscapedError listing interior sites
// that are not definite.
MetricField connection_metric(const Field& F);

// Interior sites plus the frozen sites whose curvature stencil reaches the
// interior. Curvature elsewhere does not depend on the perturbation.
std::vector<char> active_sites(const Grid& g);
// Sum of tr(Q^2) |mu| over active sites.
double energy_E(const ConnState& s);
double active_mu_integral(const Field& F);
double chern_weil_chart(const Field& F);  // (1/3) int sum F_i ^ F_i
// The same integral for the round S^4 curvature over [-half, half]^4,
// evaluated from the analytic integrand 32 / (1 + r^2)^4.
double chern_weil_round_s4(double half);

// Pointwise L and its adjoint for the half-scaled pairing.
Eigen::Matrix3d L_apply(const Frame3<double>& F, const Frame3<double>& T);
Frame3<double> L_star_apply(const Frame3<double>& F, const Eigen::Matrix3d& M);

// S u = i_u F and its pointwise adjoint under g.
Field S_apply(const Field& F, const Field& u);
Field S_star_apply(const Field& F, const MetricField& g, const Field& b);
// Mass product of vector fields: sum w sqrt(det g) u^T g v.
double vector_inner(const Field& u, const Field& v, const MetricField& g);
// nabla* nabla on vector fields (degree 0, fibre 4) for the Levi-Civita
// connection of g, built from the lattice derivative and its mass adjoint.
Field vector_laplacian(const MetricField& g, const Field& u);

enum class FlowMode { Plain, Adjusted, Stabilized };
std::string to_string(FlowMode m);
FlowMode flow_mode_from_string(const std::string& s);

// Plain: -d_A*(B F) with B = 4Q - (2/3) tr(Q^2) Id, so <rhs, b> = -dE[b].
// Zero on the frozen layer.
Field flow_rhs(const ConnState& s, FlowMode mode);

struct ConnFlowConfig {
  FlowMode mode = FlowMode::Stabilized;
  int max_steps = 4000;
  double tolerance = 0;         // stop once sup|Q - Id| falls below this
  double target_reduction = 0;  // or below initial / target_reduction
  double cfl = 0.9;             // explicit step = cfl / lambda_max
  bool local_time_stepping = true;
  // Explicit modes step with rhs(A) - rhs(A-hat), so that the discrete
  // background, whose residual is a discretisation artefact, stays fixed.
  bool subtract_background_residual = true;
  int power_iterations = 25;
  double step_factor = 0.2;     // Plain: initial trial step * h^2
  int max_halvings = 60;
  double armijo = 1e-4;
  int log_every = 10;
};

struct ConnFlowRow {
  int step = 0;
  double t = 0, E = 0, sup_Q_dev = 0, min_eig_Q = 0, bianchi_res = 0, step_size = 0;
  long sign_flips = 0;
  double interior_volume = 0;
  int ls_halvings = 0;
};

struct ConnFlowResult {
  ConnState state;
  std::vector<ConnFlowRow> rows;
  bool converged = false;
  double lambda_max = 0;
};

ConnFlowResult run_flow(const ConnState& s, const ConnFlowConfig& cfg);
void write_connection_csv(const std::string& path, const std::vector<ConnFlowRow>& rows);

struct ConnQStats {
  double sup_dev = 0;  // over interior sites, max abs entry
  double min_eig = 0;
};
ConnQStats conn_q_stats(const Field& F);

// Round S^4 in the conformal chart: g = 4/(1+r^2)^2 delta, theta_i = W^2 w_i.
Field round_s4_frame(const Grid& g);
Field background_round_s4(const Grid& g);
// Smooth perturbation supported in the ball of radius `support`, with
// sup|a| = amplitude * sup|background|.
Field interior_perturbation(const ConnState& s, double amplitude, std::uint64_t seed, double support = 2.0);

// RMS over all sites of d_A F_A and of d_A theta.
double bianchi_residual(const Field& A);
double torsion_residual(const Field& A, const Field& theta);

// G_A b = d_A*(K d_A b) + S Delta S* b + d_A d_A* b, K = L* Pi Theta Pi L,
// restricted to interior-supported fields.
class GOperator {
 public:
  explicit GOperator(const ConnState& s);
  Field apply(const Field& b) const;
  double inner(const Field& a, const Field& b) const;  // M1 product of g_A
  Field random_interior(std::uint64_t seed) const;
  const MetricField& metric() const { return g_; }

 private:
  Field A_, F_;
  MetricField g_;
  std::vector<int> orient_;
  std::vector<char> active_;
};

Field g_operator_apply(const ConnState& s, const Field& b);

struct GReport {
  double max_asymmetry = 0;  // relative, over random pairs
  double min_rayleigh = 0;   // over random interior fields
  double min_eig_estimate = 0;
  int pairs = 0, samples = 0;
};
GReport g_operator_check(const ConnState& s, int pairs, int samples, int lanczos_steps, std::uint64_t seed);

}  // namespace defcon
