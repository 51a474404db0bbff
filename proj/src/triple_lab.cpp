#include "defcon/triple_lab.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace defcon {

namespace {

using Frame = Frame3<double>;

Frame frame_at(const Field& f, long s) { return Eigen::Map<const Frame>(f.at(s)); }

// Neumaier-compensated sum; F is compared across line-search trials at the
// 1e-14 level near convergence.
struct Accumulator {
  double sum = 0, c = 0;
  void add(double x) {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

void require_definite(const TripleState& s) {
  const auto bad = escaped_sites(s);
  if (!bad.empty()) {
    EscapedError e("triple is not definite at " + std::to_string(bad.size()) + " sites");
    e.sites = bad;
    throw e;
  }
}

}  // namespace

TripleState make_triple_state(const Field& omega, const Field& a) {
  const Grid& g = omega.grid;
  g.validate();
  if (g.topology != Topology::Periodic) throw TopologyError("triples live on the periodic torus");
  if (omega.degree != 2 || omega.fibre != 3) throw Error("reference triple must be three 2-forms");
  if (a.degree != 1 || a.fibre != 3 || !(a.grid == g)) throw Error("potential must be three 1-forms on the same grid");
  if (max_abs(d_discrete(omega)) > 1e-10) throw Error("reference triple is not closed");
  return {omega, a};
}

TripleState make_triple_state(const Field& omega) { return make_triple_state(omega, zeros(omega.grid, 1, 3)); }

Field standard_triple_field(const Grid& g) {
  const Frame st = standard_triple<double>();
  return sample(g, 2, 3, [&](const Vec4<double>&, double* v) {
    Eigen::Map<Frame> m(v);
    m = st;
  });
}

Field current_triple(const TripleState& s) {
  Field c = d_discrete(s.a);
  c.data += s.omega.data;
  return c;
}

Field mu_volume(const TripleState& s) {
  const Field c = current_triple(s);
  Field mu = zeros(c.grid, 4, 1);
  for (long x = 0; x < c.grid.sites(); ++x) mu.data[x] = mu_of<double>(frame_at(c, x));
  return mu;
}

std::vector<Eigen::Matrix3d> q_field(const TripleState& s) {
  const Field c = current_triple(s);
  std::vector<Eigen::Matrix3d> Q(c.grid.sites());
  std::vector<long> bad;
  for (long x = 0; x < c.grid.sites(); ++x) {
    const Eigen::Matrix3d G = gram_matrix<double>(frame_at(c, x));
    const double mu = G.trace() / 3;
    if (std::abs(mu) <= 1e-300) {
      bad.push_back(x);
      continue;
    }
    Q[x] = G / mu;
  }
  if (!bad.empty()) {
    DegenerateVolumeError e("mu vanishes at " + std::to_string(bad.size()) + " sites");
    e.sites = bad;
    throw e;
  }
  return Q;
}

std::vector<long> escaped_sites(const TripleState& s) {
  const Field c = current_triple(s);
  std::vector<long> bad;
  for (long x = 0; x < c.grid.sites(); ++x)
    if (!is_definite<double>(gram_matrix<double>(frame_at(c, x)), 1)) bad.push_back(x);
  return bad;
}

double energy_F(const TripleState& s) {
  require_definite(s);
  const Field c = current_triple(s);
  Accumulator acc;
  for (long x = 0; x < c.grid.sites(); ++x) {
    const Eigen::Matrix3d G = gram_matrix<double>(frame_at(c, x));
    acc.add((G * G).trace() / (G.trace() / 3));
  }
  return acc.value() * c.grid.cell_volume();
}

double total_volume(const TripleState& s) {
  const Field mu = mu_volume(s);
  Accumulator acc;
  for (long x = 0; x < mu.data.size(); ++x) acc.add(mu.data[x]);
  return acc.value() * mu.grid.cell_volume();
}

Eigen::Matrix3d period_gram(const TripleState& s) {
  const Field c = current_triple(s);
  Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
  for (long x = 0; x < c.grid.sites(); ++x) G += gram_matrix<double>(frame_at(c, x));
  return G * c.grid.cell_volume();
}

TripleState normalize_periods(const TripleState& s) {
  const Eigen::Matrix3d G = period_gram(s);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(G);
  if (es.eigenvalues().minCoeff() <= 0) throw IndefinitePeriodError("period matrix is not positive definite");
  const Eigen::Matrix3d R = es.operatorInverseSqrt();
  auto mix = [&](const Field& f) {
    Field out = f;
    const int c = f.comps();
    for (long x = 0; x < f.grid.sites(); ++x) {
      Eigen::Map<const Eigen::MatrixXd> in(f.at(x), c, 3);
      Eigen::Map<Eigen::MatrixXd> o(out.at(x), c, 3);
      o = in * R;  // R symmetric: column i = sum_j R_ij f_j
    }
    return out;
  };
  return {mix(s.omega), mix(s.a)};
}

MetricField triple_metric(const TripleState& s) {
  const Field c = current_triple(s);
  MetricField m = euclidean_metric(c.grid);
  const long N = c.grid.sites();
  std::vector<char> bad(N, 0);
#pragma omp parallel for schedule(static)
  for (long x = 0; x < N; ++x) {
    const Frame F = frame_at(c, x);
    const double mu = mu_of<double>(F);
    if (!(mu > 0) || !is_definite<double>(gram_matrix(F), 1)) {
      bad[x] = 1;
      continue;
    }
    try {
      m.at(x) = reconstruct_metric<double>(F, mu).g;
    } catch (const Error&) {
      bad[x] = 1;
    }
  }
  std::vector<long> sites;
  for (long x = 0; x < N; ++x)
    if (bad[x]) sites.push_back(x);
  if (!sites.empty()) {
    EscapedError e("triple is not definite at " + std::to_string(sites.size()) + " sites");
    e.sites = sites;
    throw e;
  }
  return m;
}

namespace {

Field b_omega(const Field& c) {
  Field out = zeros(c.grid, 2, 3);
  const long N = c.grid.sites();
#pragma omp parallel for schedule(static)
  for (long x = 0; x < N; ++x) {
    const Frame F = frame_at(c, x);
    const Eigen::Matrix3d Q = gram_matrix(F) / mu_of<double>(F);
    const Eigen::Matrix3d B = Q - (Q * Q).trace() / 6 * Eigen::Matrix3d::Identity();
    Eigen::Map<Frame> o(out.at(x));
    o = F * B;
  }
  return out;
}

}  // namespace

Field flow_rhs_triples(const TripleState& s) {
  const MetricField g = triple_metric(s);
  Field r = codifferential(b_omega(current_triple(s)), g);
  r.data = -r.data;
  return r;
}

Field band_limited_perturbation(const TripleState& s, double amplitude, std::uint64_t seed) {
  const Grid& g = s.omega.grid;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  struct Mode {
    std::array<int, 4> k;
    Eigen::Matrix<double, 12, 1> c, d;
  };
  std::vector<Mode> modes;
  for (int k0 = -1; k0 <= 1; ++k0)
    for (int k1 = -1; k1 <= 1; ++k1)
      for (int k2 = -1; k2 <= 1; ++k2)
        for (int k3 = -1; k3 <= 1; ++k3) {
          const std::array<int, 4> k{k0, k1, k2, k3};
          const int n2 = k0 * k0 + k1 * k1 + k2 * k2 + k3 * k3;
          // One representative per +-k pair: first nonzero entry positive.
          int first = 0;
          for (int v : k)
            if (v != 0) {
              first = v;
              break;
            }
          if (n2 < 1 || n2 > 3 || first < 0) continue;
          Mode m{k, {}, {}};
          for (int i = 0; i < 12; ++i) m.c(i) = gauss(rng), m.d(i) = gauss(rng);
          modes.push_back(m);
        }
  Field a = zeros(g, 1, 3);
  for (long x = 0; x < g.sites(); ++x) {
    const Vec4<double> p = g.position(x);
    Eigen::Map<Eigen::Matrix<double, 12, 1>> v(a.at(x));
    for (const Mode& m : modes) {
      double ph = 0;
      for (int i = 0; i < 4; ++i) ph += 2 * std::numbers::pi * m.k[i] * p(i) / (g.shape[i] * g.spacing[i]);
      v += std::cos(ph) * m.c + std::sin(ph) * m.d;
    }
  }
  const double da = max_abs(d_discrete(a));
  if (da > 0) a.data *= amplitude * max_abs(s.omega) / da;
  return a;
}

QStats q_stats(const TripleState& s) {
  QStats st;
  st.min_eig = 1e300;
  for (const Eigen::Matrix3d& Q : q_field(s)) {
    st.sup_dev = std::max(st.sup_dev, (Q - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
    st.min_eig = std::min(st.min_eig, Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(Q).eigenvalues()(0));
  }
  return st;
}

TripleFlowResult run_flow_triples(const TripleState& s0, const TripleFlowConfig& cfg) {
  TripleFlowResult res;
  res.state = s0;
  {
    const auto bad = escaped_sites(s0);
    if (!bad.empty()) {
      FlowEscapeError e("initial triple is not definite");
      e.sites = bad;
      throw e;
    }
  }
  const double h = s0.omega.grid.spacing[0];
  double t = 0, F = energy_F(s0);
  auto log = [&](int step, double tau, int halvings) {
    const QStats q = q_stats(res.state);
    res.rows.push_back({step, t, F, total_volume(res.state), q.sup_dev, q.min_eig, tau, halvings});
    return q.sup_dev;
  };
  if (log(0, 0, 0) < cfg.tolerance) {
    res.converged = true;
    return res;
  }
  for (int step = 1; step <= cfg.max_steps; ++step) {
    const MetricField g = triple_metric(res.state);
    const Field rhs = flow_rhs_triples(res.state);
    // dF[rhs] = -4 |rhs|^2.
    const double slope = 4 * l2_inner(rhs, rhs, g);
    double tau = cfg.step_factor * h * h;
    int halvings = 0;
    for (;; ++halvings) {
      if (halvings > cfg.max_halvings) throw StepError("line search failed after " + std::to_string(cfg.max_halvings) + " halvings");
      TripleState trial = res.state;
      axpy(tau, rhs, trial.a);
      if (escaped_sites(trial).empty()) {
        const double Ft = energy_F(trial);
        if (Ft < F && Ft <= F - cfg.armijo * tau * slope) {
          res.state = std::move(trial);
          F = Ft;
          break;
        }
      }
      tau *= 0.5;
    }
    t += tau;
    if (log(step, tau, halvings) < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  return res;
}

void write_triple_csv(const std::string& path, const std::vector<TripleFlowRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(17);
  out << "step,t,F,vol,sup_Q_dev,min_eig_Q,step_size,ls_halvings\n";
  for (const auto& r : rows)
    out << r.step << ',' << r.t << ',' << r.F << ',' << r.vol << ',' << r.sup_Q_dev << ',' << r.min_eig_Q << ','
        << r.step_size << ',' << r.ls_halvings << '\n';
}

GaugeTangents gauge_actions(const TripleState& s, const Field& f, const Field& v) {
  if (f.degree != 0 || f.fibre != 3) throw Error("function action needs three functions");
  if (v.degree != 0 || v.fibre != 4) throw Error("vector action needs a vector field");
  GaugeTangents t;
  t.function_action = d_discrete(f);
  const Field c = current_triple(s);
  t.vector_action = zeros(c.grid, 1, 3);
  for (long x = 0; x < c.grid.sites(); ++x) {
    const Vec4<double> u = Eigen::Map<const Vec4<double>>(v.at(x));
    for (int i = 0; i < 3; ++i) {
      Eigen::Map<Form1<double>> o(t.vector_action.at(x) + 4 * i);
      o = interior<2>(u, Form2<double>(Eigen::Map<const Form2<double>>(c.at(x) + 6 * i)));
    }
  }
  return t;
}

CriticalReport critical_check(const TripleState& s) {
  const MetricField g = triple_metric(s);
  const Field bo = b_omega(current_triple(s));
  CriticalReport r;
  const Field cd = codifferential(bo, g);
  r.codiff_norm = std::sqrt(l2_inner(cd, cd, g));
  const Field d = d_discrete(bo);
  r.d_norm = std::sqrt(l2_inner(d, d, g));
  const auto Q = q_field(s);
  for (const auto& q : Q) r.mean_Q += q;
  r.mean_Q /= double(Q.size());
  for (const auto& q : Q) r.q_variation = std::max(r.q_variation, (q - r.mean_Q).cwiseAbs().maxCoeff());
  return r;
}

}  // namespace defcon
