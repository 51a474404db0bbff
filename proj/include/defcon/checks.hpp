#pragma once
// Measurement suites shared by the `verify` subcommand and the acceptance
// driver. Each suite reports raw measurements; callers apply tolerances.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "defcon/exterior4.hpp"

namespace defcon::checks {

Frame3<double> random_definite_frame(std::mt19937_64& rng);
// GL(4) image of the standard triple: Q = Id.
Frame3<double> random_perfect_frame(std::mt19937_64& rng);

struct IndexSuite {
  long index_2_0 = 0, index_3_m1 = 0;
  long pairs = 0, formula_mismatches = 0;
};
IndexSuite index_suite(int pairs, std::uint64_t seed);

struct SpinSuite {
  int items = 0, holding = 0;
  std::vector<std::string> failing;
};
SpinSuite spin_suite();

// Worst residuals relative to the natural scale of each identity.
struct PointwiseSuite {
  int draws = 0;
  double lemma = 0;                // 4d identity on the reconstructed metric
  double corollary = 0;            // |L(a ^ i_u F) - a(u) Q|, unit factor
  double corollary_half = 0;       // |L(a ^ i_u F) - a(u) Q / 2|
  double corollary_ratio = 0;      // least-squares factor c in L(a ^ i_u F) = c a(u) Q
  double adjointness = 0;          // (L T, M) vs (T, L* M)
  double trace_q = 0;
  double delta_q_trace = 0;
};
PointwiseSuite pointwise_suite(int draws, std::uint64_t seed);

struct ExactSuite {
  int draws = 0, certified = 0;
  int min_rank_injection = 99, max_rank_injection = 0, min_rank_sigma = 99, max_rank_sigma = 0;
  double worst_angle = 0;
};
ExactSuite exact_suite(int draws, std::uint64_t seed);

struct ParabolicSuite {
  int draws = 0;
  double max_eigenvalue = -1e300;      // symmetric part
  double max_real_eigenvalue = -1e300; // full operator
  double min_bound_ratio = 1e300;      // -(Sigma b, b) / (|S* b|^2 + |w* b|^2) at perfect data
};
ParabolicSuite parabolic_suite(int draws, int vectors, std::uint64_t seed);

struct LinearisationSuite {
  int draws = 0;
  double delta_q = 0, delta_b_compact = 0, delta_b_expanded = 0;  // vs Richardson differences
  double triple_gradient = 0, connection_gradient = 0;            // Plain rhs vs energy gradient
};
LinearisationSuite linearisation_suite(int draws, int grid, std::uint64_t seed);

struct TripleRun {
  std::uint64_t seed = 0;
  bool converged = false, monotone = false;
  double final_dev = 0, final_gap = 0, seconds = 0;
  int steps = 0;
};
TripleRun triple_run(int grid, double amplitude, std::uint64_t seed, int max_steps);

struct BackgroundFloor {
  std::vector<int> grids;
  std::vector<double> sup_dev;
};
BackgroundFloor background_floor(const std::vector<int>& grids, double half);

struct ConnectionRun {
  double initial_dev = 0, final_dev = 0, best_dev = 0, lambda_max = 0, seconds = 0;
  long sign_flips = 0;
  int steps = 0;
  bool reached = false;
};
ConnectionRun connection_run(int grid, double half, double amplitude, std::uint64_t seed, double target_reduction,
                             int max_steps);

struct GSuite {
  double max_asymmetry = 0, min_rayleigh = 0, seconds = 0;
  int pairs = 0, samples = 0, positive = 0;
};
GSuite g_suite(int grid, double half, int pairs, int samples, std::uint64_t seed);

struct ChernWeilSuite {
  double half = 0, exact = 0, full_sphere = 0;
  std::vector<int> grids;
  std::vector<double> values, rel_errors;
  double centered2_value = 0, centered2_rel_error = 0;
};
ChernWeilSuite chern_weil_suite(const std::vector<int>& grids, double half);

struct MomentSuite {
  double perfect_max_moment = 0, perfect_max_variance = 0;
  std::vector<double> s, pair;
  double slope = 0, r2 = 0;
  double max_isotropy = 0;
};
MomentSuite moment_suite(std::uint64_t seed);

struct OrderSuite {
  std::vector<int> grids;
  std::vector<double> bianchi, torsion;
  std::vector<double> bianchi_ratio, torsion_ratio;
};
OrderSuite order_suite(const std::vector<int>& grids, double half);

}  // namespace defcon::checks
