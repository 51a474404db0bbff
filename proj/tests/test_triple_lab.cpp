#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "defcon/triple_lab.hpp"

using namespace defcon;
using namespace testutil;

namespace {

Field mixed_triple(const Grid& g, const Eigen::Matrix3d& M) {
  const Frame3<double> F = standard_triple<double>() * M;
  return sample(g, 2, 3, [&](const Vec4<double>&, double* v) {
    Eigen::Map<Frame3<double>> m(v);
    m = F;
  });
}

Field random_field(const Grid& g, int degree, int fibre) {
  Field f = zeros(g, degree, fibre);
  for (long i = 0; i < f.data.size(); ++i) f.data[i] = gauss();
  return f;
}

TripleState perturbed(int n, double amp, std::uint64_t seed) {
  TripleState s = normalize_periods(make_triple_state(standard_triple_field(periodic_grid(n, 1.0))));
  s.a = band_limited_perturbation(s, amp, seed);
  return s;
}

}  // namespace

TEST_CASE("volume form and Q") {
  const Grid g = periodic_grid(4, 1.0);
  const TripleState st = make_triple_state(standard_triple_field(g));
  CHECK(max_abs(mu_volume(st)) == doctest::Approx(2.0));
  for (const auto& Q : q_field(st)) CHECK((Q - Eigen::Matrix3d::Identity()).norm() < 1e-15);

  TripleState scaled = make_triple_state(mixed_triple(g, 1.5 * Eigen::Matrix3d::Identity()));
  CHECK(mu_volume(scaled).data[7] == doctest::Approx(2.0 * 2.25));

  Eigen::Matrix3d M = Eigen::Matrix3d::Identity();
  M(1, 2) = 1;  // third form omega_2 + omega_3
  const TripleState m = make_triple_state(mixed_triple(g, M));
  CHECK(mu_volume(m).data[3] == doctest::Approx(8.0 / 3.0));
  Eigen::Matrix3d expect;
  expect << 2, 0, 0, 0, 2, 2, 0, 2, 4;
  expect *= 3.0 / 8.0;
  for (const auto& Q : q_field(m)) {
    CHECK((Q - expect).norm() < 1e-14);
    CHECK(Q.trace() == doctest::Approx(3.0).epsilon(1e-14));
  }
  TripleState zero = make_triple_state(zeros(g, 2, 3));
  CHECK_THROWS_AS(q_field(zero), DegenerateVolumeError);
  CHECK_THROWS_AS(make_triple_state(standard_triple_field(chart_grid(8, 1.0, 2, Scheme::Centered))), TopologyError);
}

TEST_CASE("trace of Q on perturbed states") {
  const TripleState s = perturbed(6, 0.05, 3);
  for (const auto& Q : q_field(s)) CHECK(std::abs(Q.trace() - 3) < 1e-12);
}

TEST_CASE("energy lower bound") {
  const TripleState st = normalize_periods(make_triple_state(standard_triple_field(periodic_grid(4, 1.0))));
  CHECK(total_volume(st) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(energy_F(st) == doctest::Approx(3.0).epsilon(1e-14));
  const TripleState p = perturbed(6, 0.05, 7);
  CHECK(total_volume(p) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(energy_F(p) > 3.0 + 1e-6);
  CHECK(energy_F(p) >= 3 * total_volume(p));
  // Constant mixing: Q != Id, F = 3 vol only if Q = Id.
  Eigen::Matrix3d M = Eigen::Matrix3d::Identity();
  M(0, 0) = 1.2;
  const TripleState mm = make_triple_state(mixed_triple(periodic_grid(4, 1.0), M));
  CHECK(energy_F(mm) > 3 * total_volume(mm) * (1 + 1e-4));
}

TEST_CASE("energy is invariant under constant rotations") {
  const TripleState p = perturbed(6, 0.05, 11);
  const Eigen::Matrix3d R = Eigen::AngleAxisd(0.4, Eigen::Vector3d(1, -1, 2).normalized()).toRotationMatrix();
  TripleState r = p;
  for (Field* f : {&r.omega, &r.a}) {
    const int c = f->comps();
    for (long x = 0; x < f->grid.sites(); ++x) {
      Eigen::Map<Eigen::MatrixXd> m(f->at(x), c, 3);
      m = Eigen::MatrixXd(m) * R;
    }
  }
  CHECK(energy_F(r) == doctest::Approx(energy_F(p)).epsilon(1e-13));
  const auto Qp = q_field(p), Qr = q_field(r);
  for (size_t x = 0; x < Qp.size(); ++x) CHECK((Qr[x] - R.transpose() * Qp[x] * R).norm() < 1e-13);
}

TEST_CASE("period normalisation") {
  const Grid g = periodic_grid(4, 1.0);
  const TripleState st = make_triple_state(standard_triple_field(g));
  CHECK((period_gram(st) - 2 * Eigen::Matrix3d::Identity()).norm() < 1e-14);
  const TripleState n = normalize_periods(st);
  CHECK(max_abs(n.omega) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK((period_gram(n) - Eigen::Matrix3d::Identity()).norm() < 1e-10);
  CHECK((normalize_periods(n).omega.data - n.omega.data).cwiseAbs().maxCoeff() < 1e-12);

  const Eigen::Matrix3d M = Eigen::Vector3d(1 / std::sqrt(2.0), std::sqrt(2.0), 1 / std::sqrt(2.0)).asDiagonal();
  const TripleState d = make_triple_state(mixed_triple(g, M));
  CHECK((period_gram(d) - Eigen::Matrix3d(Eigen::Vector3d(1, 4, 1).asDiagonal())).norm() < 1e-14);
  const TripleState dn = normalize_periods(d);
  CHECK(dn.omega(0, 1, 1) == doctest::Approx(d.omega(0, 1, 1) / 2));
  CHECK(dn.omega(0, 0, 0) == doctest::Approx(d.omega(0, 0, 0)));

  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(2, 2) = 0;
  CHECK_THROWS_AS(normalize_periods(make_triple_state(mixed_triple(g, bad))), IndefinitePeriodError);
}

TEST_CASE("flow rhs vanishes at the hyperkaehler triple") {
  const TripleState st = normalize_periods(make_triple_state(standard_triple_field(periodic_grid(4, 1.0))));
  CHECK(max_abs(flow_rhs_triples(st)) < 1e-12);
}

TEST_CASE("flow rhs is the gradient of F") {
  TripleState s = perturbed(6, 0.05, 5);
  const Field rhs = flow_rhs_triples(s);
  const MetricField g = triple_metric(s);
  for (int k = 0; k < 3; ++k) {
    const Field b = random_field(s.a.grid, 1, 3);
    const double eps = 1e-5;
    TripleState p = s, m = s;
    axpy(eps, b, p.a);
    axpy(-eps, b, m.a);
    const double fd = (energy_F(p) - energy_F(m)) / (2 * eps);
    CHECK(l2_inner(rhs, b, g) == doctest::Approx(-fd / 4).epsilon(1e-4));
  }
}

TEST_CASE("gauge actions") {
  const TripleState s = perturbed(6, 0.05, 9);
  const Grid& g = s.a.grid;
  Field f = sample(g, 0, 3, [](const Vec4<double>&, double* v) { v[0] = 1, v[1] = -2, v[2] = 0.5; });
  Field v = sample(g, 0, 4, [](const Vec4<double>&, double* u) { u[0] = 0.3, u[1] = -1, u[2] = 0.2, u[3] = 0.7; });
  GaugeTangents t = gauge_actions(s, f, v);
  CHECK(max_abs(t.function_action) < 1e-14);

  Field rf = random_field(g, 0, 3);
  TripleState moved = s;
  axpy(1.0, gauge_actions(s, rf, v).function_action, moved.a);
  CHECK(energy_F(moved) == doctest::Approx(energy_F(s)).epsilon(1e-14));

  // Constant v: d(i_v omega_a) = sum_mu v^mu D_mu omega_a because omega_a is closed.
  const Field lhs = d_discrete(t.vector_action);
  const Field c = current_triple(s);
  Field rhs = zeros(g, 2, 3);
  const double vv[4] = {0.3, -1, 0.2, 0.7};
  for (int mu = 0; mu < 4; ++mu) {
    const AxisOperator op = axis_operator(g, mu);
    Field tmp = zeros(g, 2, 3);
    apply_axis(g, op, mu, c.data.data(), tmp.data.data(), c.block());
    axpy(vv[mu], tmp, rhs);
  }
  CHECK((lhs.data - rhs.data).cwiseAbs().maxCoeff() < 1e-12 * max_abs(rhs));

  const TripleState flat = make_triple_state(standard_triple_field(g));
  CHECK(max_abs(d_discrete(gauge_actions(flat, f, v).vector_action)) < 1e-14);
}

TEST_CASE("critical check") {
  const TripleState st = normalize_periods(make_triple_state(standard_triple_field(periodic_grid(4, 1.0))));
  const CriticalReport r = critical_check(st);
  CHECK(r.codiff_norm < 1e-10);
  CHECK(r.d_norm < 1e-10);
  CHECK(r.q_variation < 1e-10);
  const CriticalReport p = critical_check(perturbed(6, 0.05, 2));
  CHECK(p.codiff_norm > 1e-4);
}

TEST_CASE("triple flow converges on a small torus") {
  const TripleState s = perturbed(6, 0.05, 1);
  TripleFlowConfig cfg;
  cfg.max_steps = 2000;
  const TripleFlowResult r = run_flow_triples(s, cfg);
  CHECK(r.converged);
  for (size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i].F < r.rows[i - 1].F);
  CHECK(r.rows.back().sup_Q_dev < 1e-6);
  CHECK(r.rows.back().F - 3 < 1e-6);
  const CriticalReport c = critical_check(r.state);
  CHECK(c.q_variation < 1e-5);

  const TripleState st = normalize_periods(make_triple_state(standard_triple_field(periodic_grid(4, 1.0))));
  const TripleFlowResult z = run_flow_triples(st, cfg);
  CHECK(z.converged);
  CHECK(z.rows.size() == 1);
}
