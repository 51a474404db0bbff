#pragma once
// Definite triples omega + da on the periodic 4-torus and their energy
// F = int tr(Q^2) mu, with mu = (1/3) sum omega_i ^ omega_i.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "defcon/errors.hpp"
#include "defcon/lattice.hpp"

namespace defcon {

struct TripleState {
  Field omega;  // degree 2, fibre 3, discretely closed
  Field a;      // degree 1, fibre 3
};

// Validates topology, shapes and closedness of the reference triple.
TripleState make_triple_state(const Field& omega, const Field& a);
TripleState make_triple_state(const Field& omega);
Field standard_triple_field(const Grid& g);

Field current_triple(const TripleState& s);  // omega + da

Field mu_volume(const TripleState& s);  // degree 4, fibre 1
// Per-site Q; throws DegenerateVolumeError listing sites where mu vanishes.
std::vector<Eigen::Matrix3d> q_field(const TripleState& s);
// Sites where the current triple is not positive definite.
std::vector<long> escaped_sites(const TripleState& s);

double energy_F(const TripleState& s);
double total_volume(const TripleState& s);
Eigen::Matrix3d period_gram(const TripleState& s);
TripleState normalize_periods(const TripleState& s);

// Reconstructed metric of the current triple with dvol = mu / 2.
MetricField triple_metric(const TripleState& s);
// -codifferential(B omega_a) with B = Q - (1/6) tr(Q^2) Id. For self-dual
// B omega_a, <rhs, b> = -(1/4) dF[b] in the metric of the current triple.
Field flow_rhs_triples(const TripleState& s);

// Smooth random E-valued 1-form built from the Fourier modes with
// 1 <= |k|^2 <= 3, scaled so that sup|da| = amplitude * sup|omega|.
Field band_limited_perturbation(const TripleState& s, double amplitude, std::uint64_t seed);

struct TripleFlowConfig {
  double step_factor = 0.2;  // initial step = step_factor * h^2
  double tolerance = 1e-6;   // sup |Q - Id|
  int max_steps = 20000;
  int max_halvings = 60;
  double armijo = 1e-4;
};

struct TripleFlowRow {
  int step = 0;
  double t = 0, F = 0, vol = 0, sup_Q_dev = 0, min_eig_Q = 0, step_size = 0;
  int ls_halvings = 0;
};

struct TripleFlowResult {
  TripleState state;
  std::vector<TripleFlowRow> rows;
  bool converged = false;
};

// Gradient descent with Armijo backtracking and a definiteness guard.
// Throws FlowEscapeError or StepError.
TripleFlowResult run_flow_triples(const TripleState& s, const TripleFlowConfig& cfg);
void write_triple_csv(const std::string& path, const std::vector<TripleFlowRow>& rows);

struct QStats {
  double sup_dev = 0;  // sup |Q - Id| (max abs entry)
  double min_eig = 0;
};
QStats q_stats(const TripleState& s);

// Infinitesimal actions: functions f (degree 0, fibre 3) act by df, vector
// fields v (degree 0, fibre 4) by i_v omega_a.
struct GaugeTangents {
  Field function_action;
  Field vector_action;
};
GaugeTangents gauge_actions(const TripleState& s, const Field& f, const Field& v);

struct CriticalReport {
  double codiff_norm = 0;  // |d*(B omega_a)| in L2
  double d_norm = 0;       // |d(B omega_a)| in L2
  double q_variation = 0;  // sup over sites of |Q - mean Q|
  Eigen::Matrix3d mean_Q = Eigen::Matrix3d::Zero();
};
CriticalReport critical_check(const TripleState& s);

}  // namespace defcon
