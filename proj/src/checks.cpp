#include "defcon/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "defcon/connection_lab.hpp"
#include "defcon/moment_map.hpp"
#include "defcon/symbols.hpp"
#include "defcon/topology.hpp"
#include "defcon/triple_lab.hpp"

namespace defcon::checks {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <class M>
M gaussian(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  M m;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = n(rng);
  return m;
}

Vec gaussian_vec(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> d;
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

Mat4<double> random_gl4(std::mt19937_64& rng) {
  for (;;) {
    const Mat4<double> L = Mat4<double>::Identity() + 0.5 * gaussian<Mat4<double>>(rng);
    if (L.determinant() > 0.2) return L;
  }
}

// Image of a frame under the linear map x -> L^{-1} x.
Frame3<double> push_forward(const Mat4<double>& L, const Frame3<double>& f) {
  const Mat4<double> Li = L.inverse();
  Frame3<double> r;
  for (int i = 0; i < 3; ++i) r.col(i) = from_matrix<double>(Li.transpose() * as_matrix<double>(f.col(i)) * Li);
  return r;
}

Eigen::Matrix3d q_of(const Frame3<double>& F) {
  const Eigen::Matrix3d G = gram_matrix(F);
  return G / (G.trace() / 3);
}

Eigen::Matrix3d b_of(const Frame3<double>& F) {
  const Eigen::Matrix3d Q = q_of(F);
  return 4 * Q - (2.0 / 3.0) * (Q * Q).trace() * Eigen::Matrix3d::Identity();
}

template <class Fn>
Eigen::Matrix3d richardson(const Frame3<double>& F, const Vec& T, Fn fn) {
  auto shifted = [&](double e) {
    Frame3<double> G = F;
    for (int i = 0; i < 3; ++i) G.col(i) += e * T.segment<6>(6 * i);
    return G;
  };
  auto cd = [&](double h) { return Eigen::Matrix3d((fn(shifted(h)) - fn(shifted(-h))) / (2 * h)); };
  const double h = 1e-3;
  return (4 * cd(h / 2) - cd(h)) / 3;
}

Field gaussian_field(const Grid& g, int degree, int fibre, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Field f = zeros(g, degree, fibre);
  for (long i = 0; i < f.data.size(); ++i) f.data[i] = n(rng);
  return f;
}

ConnState round_state(int n, double half, Scheme sc = Scheme::Centered4) {
  return make_conn_state(background_round_s4(chart_grid(n, half, 2, sc)));
}

}  // namespace

Frame3<double> random_definite_frame(std::mt19937_64& rng) {
  Eigen::Matrix3d M = Eigen::Matrix3d::Identity() + 0.3 * gaussian<Eigen::Matrix3d>(rng);
  while (std::abs(M.determinant()) < 0.2) M = Eigen::Matrix3d::Identity() + 0.3 * gaussian<Eigen::Matrix3d>(rng);
  return push_forward(random_gl4(rng), Frame3<double>(standard_triple<double>() * M));
}

Frame3<double> random_perfect_frame(std::mt19937_64& rng) {
  return push_forward(random_gl4(rng), standard_triple<double>());
}

IndexSuite index_suite(int pairs, std::uint64_t seed) {
  IndexSuite r;
  r.index_2_0 = index({2, 0});
  r.index_3_m1 = index({3, -1});
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long> chi(-1000, 1000), tau(-1000, 1000);
  for (int k = 0; k < pairs; ++k) {
    const TopoData d{chi(rng), tau(rng)};
    ++r.pairs;
    if (index(d) != -5 * d.chi - 7 * d.tau || index_via_characters(d) != index(d)) ++r.formula_mismatches;
  }
  return r;
}

SpinSuite spin_suite() {
  SpinSuite r;
  for (const SpinRepItem& it : spinrep_check()) {
    ++r.items;
    if (it.holds && it.dim_lhs == it.dim_rhs) ++r.holding;
    else r.failing.push_back(it.statement);
  }
  return r;
}

PointwiseSuite pointwise_suite(int draws, std::uint64_t seed) {
  PointwiseSuite r;
  r.draws = draws;
  std::mt19937_64 rng(seed);
  double num = 0, den = 0;
  for (int n = 0; n < draws; ++n) {
    const SymbolData d = make_symbol_data(random_definite_frame(rng));
    const double cond = d.g.g.norm() * d.g.g.inverse().norm();
    const Form1<double> a = gaussian<Form1<double>>(rng);
    const Vec4<double> u = gaussian<Vec4<double>>(rng);

    // 4d identity for self-dual b1, b2 of the reconstructed metric.
    const Form2<double> b1 = d.F * gaussian<Eigen::Vector3d>(rng), b2 = d.F * gaussian<Eigen::Vector3d>(rng);
    auto wi = [&](const Form2<double>& b) { return wedge<1, 1>(a, interior<2>(u, b)); };
    const double lem = inner<2>(d.g, wi(b1), b2) + inner<2>(d.g, wi(b2), b1) - inner<2>(d.g, b1, b2) * a.dot(u);
    const double lscale =
        std::sqrt(inner<2>(d.g, b1, b1) * inner<2>(d.g, b2, b2)) * a.norm() * u.norm() * std::sqrt(cond);
    r.lemma = std::max(r.lemma, std::abs(lem) / lscale);

    // L(a ^ i_u F) against a(u) Q.
    const Vec T = w2_matrix(a) * S_matrix(d) * u;
    const Eigen::Matrix3d L = L_apply(d, T), aq = a.dot(u) * d.Q;
    const double cscale = a.norm() * u.norm() * d.F.norm() * d.F.norm() / std::abs(d.mu);
    r.corollary = std::max(r.corollary, (L - aq).norm() / cscale);
    r.corollary_half = std::max(r.corollary_half, (L - 0.5 * aq).norm() / cscale);
    num += (L.transpose() * aq).trace();
    den += (aq.transpose() * aq).trace();

    // L and L* under the half-scaled product.
    const Vec R = gaussian_vec(rng, 18);
    const Eigen::Matrix3d M = vec_to_sym(gaussian<Eigen::Matrix<double, 6, 1>>(rng));
    const Vec Ls = L_star_apply(d, M);
    const double lhs = (L_apply(d, R) * M).trace(), rhs = 0.5 * Ls.dot(gram(d, Space::L2E) * R);
    r.adjointness = std::max(r.adjointness, std::abs(lhs - rhs) / (R.norm() * Ls.norm() / std::abs(d.mu) * cond));

    r.trace_q = std::max(r.trace_q, std::abs(d.Q.trace() - 3) / 3);
    r.delta_q_trace =
        std::max(r.delta_q_trace, std::abs(delta_Q(d, R).trace()) / (R.norm() * d.F.norm() / std::abs(d.mu)));
  }
  r.corollary_ratio = num / den;
  return r;
}

ExactSuite exact_suite(int draws, std::uint64_t seed) {
  ExactSuite r;
  std::mt19937_64 rng(seed);
  for (int n = 0; n < draws; ++n) {
    const SymbolData d = make_symbol_data(random_definite_frame(rng));
    const ExactSequenceReport e = exact_sequence_check(d, gaussian<Form1<double>>(rng));
    ++r.draws;
    if (e.exact) ++r.certified;
    r.min_rank_injection = std::min(r.min_rank_injection, e.rank_injection);
    r.max_rank_injection = std::max(r.max_rank_injection, e.rank_injection);
    r.min_rank_sigma = std::min(r.min_rank_sigma, e.rank_sigma);
    r.max_rank_sigma = std::max(r.max_rank_sigma, e.rank_sigma);
    r.worst_angle = std::max(r.worst_angle, e.max_principal_angle);
  }
  return r;
}

ParabolicSuite parabolic_suite(int draws, int vectors, std::uint64_t seed) {
  ParabolicSuite r;
  std::mt19937_64 rng(seed);
  for (int n = 0; n < draws; ++n) {
    const SymbolData d = make_symbol_data(random_definite_frame(rng));
    const ParabolicSymbol p = parabolic_symbol(d, gaussian<Form1<double>>(rng));
    ++r.draws;
    r.max_eigenvalue = std::max(r.max_eigenvalue, p.eigenvalues.maxCoeff());
    r.max_real_eigenvalue = std::max(r.max_real_eigenvalue, p.max_real_eigenvalue);
  }
  for (int n = 0; n < draws; ++n) {
    const SymbolData d = make_symbol_data(random_perfect_frame(rng));
    Form1<double> a = gaussian<Form1<double>>(rng);
    a /= std::sqrt(a.dot(d.g.g.inverse() * a));
    const ParabolicSymbol p = parabolic_symbol(d, a);
    const Mat Ss = adjoint(d, S_matrix(d), Space::TX, Space::L1E);
    const Mat ws = adjoint(d, w1_matrix(a), Space::E, Space::L1E);
    const Mat G1 = gram(d, Space::L1E), GT = gram(d, Space::TX), GE = gram(d, Space::E);
    for (int k = 0; k < vectors; ++k) {
      const Vec b = gaussian_vec(rng, 12);
      const double q = -b.dot(G1 * p.sigma * b);
      const Vec sb = Ss * b, wb = ws * b;
      r.min_bound_ratio = std::min(r.min_bound_ratio, q / (sb.dot(GT * sb) + wb.dot(GE * wb)));
    }
  }
  return r;
}

LinearisationSuite linearisation_suite(int draws, int grid, std::uint64_t seed) {
  LinearisationSuite r;
  r.draws = draws;
  std::mt19937_64 rng(seed);
  for (int n = 0; n < draws; ++n) {
    const SymbolData d = make_symbol_data(random_definite_frame(rng));
    const Vec T = gaussian_vec(rng, 18) * d.F.norm() / 4;
    const Eigen::Matrix3d fq = richardson(d.F, T, q_of), fb = richardson(d.F, T, b_of);
    r.delta_q = std::max(r.delta_q, (fq - delta_Q(d, T)).norm() / fq.norm());
    r.delta_b_compact = std::max(r.delta_b_compact, (fb - delta_B_compact(d, T)).norm() / fb.norm());
    r.delta_b_expanded = std::max(r.delta_b_expanded, (fb - delta_B_expanded(d, T)).norm() / fb.norm());
  }
  const double eps = 1e-5;
  {
    TripleState s = normalize_periods(make_triple_state(standard_triple_field(periodic_grid(grid, 1.0))));
    s.a = band_limited_perturbation(s, 0.05, seed);
    const Field rhs = flow_rhs_triples(s);
    const MetricField g = triple_metric(s);
    for (int k = 0; k < 3; ++k) {
      const Field b = gaussian_field(s.a.grid, 1, 3, rng);
      TripleState p = s, m = s;
      axpy(eps, b, p.a);
      axpy(-eps, b, m.a);
      const double fd = (energy_F(p) - energy_F(m)) / (2 * eps);
      r.triple_gradient = std::max(r.triple_gradient, std::abs(l2_inner(rhs, b, g) + fd / 4) / std::abs(fd / 4));
    }
  }
  {
    ConnState s = round_state(grid, 2.0);
    s.a = interior_perturbation(s, 0.02, seed, 2.0);
    const Field rhs = flow_rhs(s, FlowMode::Plain);
    const MetricField g = connection_metric(curvature(current_connection(s)));
    for (int k = 0; k < 3; ++k) {
      Field b = gaussian_field(s.a.grid, 1, 3, rng);
      for (long x = 0; x < b.grid.sites(); ++x)
        if (b.grid.frozen(x)) std::fill(b.at(x), b.at(x) + 12, 0.0);
      ConnState p = s, m = s;
      axpy(eps, b, p.a);
      axpy(-eps, b, m.a);
      const double fd = (energy_E(p) - energy_E(m)) / (2 * eps);
      r.connection_gradient = std::max(r.connection_gradient, std::abs(l2_inner(rhs, b, g) + fd) / std::abs(fd));
    }
  }
  return r;
}

TripleRun triple_run(int grid, double amplitude, std::uint64_t seed, int max_steps) {
  const auto t0 = Clock::now();
  TripleRun r;
  r.seed = seed;
  TripleState s = normalize_periods(make_triple_state(standard_triple_field(periodic_grid(grid, 1.0))));
  s.a = band_limited_perturbation(s, amplitude, seed);
  TripleFlowConfig cfg;
  cfg.max_steps = max_steps;
  const TripleFlowResult f = run_flow_triples(s, cfg);
  r.converged = f.converged;
  r.monotone = true;
  for (size_t k = 1; k < f.rows.size(); ++k)
    if (!(f.rows[k].F <= f.rows[k - 1].F)) r.monotone = false;
  r.final_dev = f.rows.back().sup_Q_dev;
  r.final_gap = f.rows.back().F - 3 * f.rows.back().vol;
  r.steps = f.rows.back().step;
  r.seconds = seconds_since(t0);
  return r;
}

BackgroundFloor background_floor(const std::vector<int>& grids, double half) {
  BackgroundFloor r;
  r.grids = grids;
  for (int n : grids) r.sup_dev.push_back(conn_q_stats(curvature(background_round_s4(chart_grid(n, half, 2)))).sup_dev);
  return r;
}

ConnectionRun connection_run(int grid, double half, double amplitude, std::uint64_t seed, double target_reduction,
                             int max_steps) {
  const auto t0 = Clock::now();
  ConnState s = round_state(grid, half);
  s.a = interior_perturbation(s, amplitude, seed);
  ConnFlowConfig cfg;
  cfg.mode = FlowMode::Stabilized;
  cfg.max_steps = max_steps;
  cfg.target_reduction = target_reduction;
  const ConnFlowResult f = run_flow(s, cfg);
  ConnectionRun r;
  r.initial_dev = f.rows.front().sup_Q_dev;
  r.final_dev = f.rows.back().sup_Q_dev;
  r.best_dev = r.initial_dev;
  for (const auto& row : f.rows) {
    r.best_dev = std::min(r.best_dev, row.sup_Q_dev);
    r.sign_flips = std::max(r.sign_flips, row.sign_flips);
  }
  r.steps = f.rows.back().step;
  r.reached = f.converged;
  r.lambda_max = f.lambda_max;
  r.seconds = seconds_since(t0);
  return r;
}

GSuite g_suite(int grid, double half, int pairs, int samples, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const GOperator G(round_state(grid, half));
  GSuite r;
  r.pairs = pairs;
  r.samples = samples;
  r.min_rayleigh = 1e300;
  std::uint64_t k = seed;
  for (int p = 0; p < pairs; ++p) {
    const Field x = G.random_interior(k++), y = G.random_interior(k++);
    const Field gx = G.apply(x), gy = G.apply(y);
    const double a = G.inner(gx, y), b = G.inner(x, gy);
    const double scale = std::sqrt(G.inner(gx, gx) * G.inner(y, y));
    r.max_asymmetry = std::max(r.max_asymmetry, std::abs(a - b) / scale);
  }
  for (int q = 0; q < samples; ++q) {
    const Field b = G.random_interior(k++);
    const double ray = G.inner(G.apply(b), b) / G.inner(b, b);
    r.min_rayleigh = std::min(r.min_rayleigh, ray);
    if (ray > 0) ++r.positive;
  }
  r.seconds = seconds_since(t0);
  return r;
}

ChernWeilSuite chern_weil_suite(const std::vector<int>& grids, double half) {
  ChernWeilSuite r;
  r.half = half;
  r.exact = chern_weil_round_s4(half);
  r.full_sphere = 16 * std::numbers::pi * std::numbers::pi / 3;
  r.grids = grids;
  for (int n : grids) {
    const double v = chern_weil_chart(curvature(background_round_s4(chart_grid(n, half, 2))));
    r.values.push_back(v);
    r.rel_errors.push_back(std::abs(v / r.exact - 1));
  }
  r.centered2_value = chern_weil_chart(curvature(background_round_s4(chart_grid(grids.back(), half, 2, Scheme::Centered))));
  r.centered2_rel_error = std::abs(r.centered2_value / r.exact - 1);
  return r;
}

MomentSuite moment_suite(std::uint64_t seed) {
  MomentSuite r;
  const Grid g = periodic_grid(4, 1.0);
  const SphereQuadrature quad = sphere_quadrature(8);
  const Field perfect = sample(g, 2, 3, [](const Vec4<double>& x, double* v) {
    Eigen::Map<Frame3<double>> m(v);
    m = (1.5 + std::sin(2 * std::numbers::pi * x(0))) * standard_triple<double>();
  });
  const PerfectReport p = perfect_check(perfect, quad, 4);
  r.perfect_max_moment = p.max_moment;
  r.perfect_max_variance = p.max_variance;

  const FibreFunction f2 =
      fibre_function(g, quad, [](const Vec4<double>&, const Eigen::Vector3d& q) { return q.x() * q.x() - q.y() * q.y(); });
  for (int k = 1; k <= 10; ++k) {
    const double s = 0.01 * k;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(Eigen::Matrix3d(Eigen::Vector3d(1 + s, 1 - s, 1).asDiagonal()));
    const Frame3<double> F = standard_triple<double>() * es.operatorSqrt();
    const Field c = sample(g, 2, 3, [&](const Vec4<double>&, double* v) {
      Eigen::Map<Frame3<double>> m(v);
      m = F;
    });
    r.s.push_back(s);
    r.pair.push_back(moment_pair(c, f2, quad));
  }
  // Least squares y = a + b s and its R^2.
  const int n = int(r.s.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < n; ++k) sx += r.s[k], sy += r.pair[k], sxx += r.s[k] * r.s[k], sxy += r.s[k] * r.pair[k];
  r.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - r.slope * sx) / n, mean = sy / n;
  double ssr = 0, sst = 0;
  for (int k = 0; k < n; ++k) {
    ssr += std::pow(r.pair[k] - icpt - r.slope * r.s[k], 2);
    sst += std::pow(r.pair[k] - mean, 2);
  }
  r.r2 = 1 - ssr / sst;

  std::mt19937_64 rng(seed);
  for (int k = 0; k < 5; ++k) {
    const Field a = gaussian_field(g, 1, 3, rng), b = gaussian_field(g, 1, 3, rng);
    r.max_isotropy = std::max(r.max_isotropy, std::abs(isotropy_pair(perfect, a, b, quad)));
  }
  return r;
}

OrderSuite order_suite(const std::vector<int>& grids, double half) {
  OrderSuite r;
  r.grids = grids;
  for (int n : grids) {
    const Grid g = chart_grid(n, half, 1, Scheme::Centered);
    const Field A = background_round_s4(g);
    r.bianchi.push_back(bianchi_residual(A));
    r.torsion.push_back(torsion_residual(A, round_s4_frame(g)));
  }
  for (size_t k = 0; k + 1 < grids.size(); ++k) {
    r.bianchi_ratio.push_back(r.bianchi[k] / r.bianchi[k + 1]);
    r.torsion_ratio.push_back(r.torsion[k] / r.torsion[k + 1]);
  }
  return r;
}

}  // namespace defcon::checks
