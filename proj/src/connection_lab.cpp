#include "defcon/connection_lab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "defcon/symbols.hpp"

namespace defcon {

namespace {

using Frame = Frame3<double>;
using Conn = Eigen::Matrix<double, 4, 3>;

struct WedgeTerm {
  int out, a, x;
  double sign;
};

// Nonzero entries of (alpha, x) -> alpha ^ x for a 1-form alpha and a p-form x.
const std::vector<WedgeTerm>& wedge_table(int p) {
  static const auto tables = [] {
    std::array<std::vector<WedgeTerm>, 3> t;
    auto fill = [&]<int P>(std::integral_constant<int, P>) {
      for (int a = 0; a < 4; ++a)
        for (int x = 0; x < binom4(P); ++x) {
          Form1<double> ea = Form1<double>::Unit(a);
          Form<double, P> ex = Form<double, P>::Unit(x);
          const Form<double, P + 1> w = wedge<1, P>(ea, ex);
          for (int o = 0; o < w.size(); ++o)
            if (w(o) != 0) t[P].push_back({o, a, x, w(o)});
        }
    };
    fill(std::integral_constant<int, 0>{});
    fill(std::integral_constant<int, 1>{});
    fill(std::integral_constant<int, 2>{});
    return t;
  }();
  if (p < 0 || p > 2) throw Error("bracket is implemented for degrees 0 to 2");
  return tables[p];
}

void check_connection(const Field& A) {
  if (A.degree != 1 || A.fibre != 3) throw Error("connection must be an so(3)-valued 1-form");
}

void check_curvature_field(const Field& F) {
  if (F.degree != 2 || F.fibre != 3) throw Error("curvature must be an so(3)-valued 2-form");
}

Frame frame_at(const Field& f, long s) { return Eigen::Map<const Frame>(f.at(s)); }

void zero_frozen(Field& f) {
  const Grid& g = f.grid;
  const int b = f.block();
  for (long s = 0; s < g.sites(); ++s)
    if (g.frozen(s)) std::fill(f.at(s), f.at(s) + b, 0.0);
}

struct Accumulator {
  double sum = 0, c = 0;
  void add(double x) {
    const double t = sum + x;
    c += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

double rms(const Field& f) { return f.data.size() ? f.data.norm() / std::sqrt(double(f.grid.sites())) : 0.0; }

// Geometry of a connection: curvature, metric, orientation and Q per site.
struct Geometry {
  Field F;
  MetricField g;
  std::vector<int> orient;
  std::vector<Eigen::Matrix3d> Q;
  std::vector<double> mu;  // |mu|
};

// Definiteness is required on active sites only. The remaining frozen sites
// never enter the energy; if they are not definite (coarse charts) they get a
// conformally flat stand-in metric.
Geometry geometry_from_curvature(Field F) {
  Geometry geo;
  geo.F = std::move(F);
  const Grid& grid = geo.F.grid;
  const long N = grid.sites();
  const std::vector<char> active = active_sites(grid);
  geo.g = euclidean_metric(grid);
  geo.orient.assign(N, 0);
  geo.Q.assign(N, Eigen::Matrix3d::Identity());
  geo.mu.assign(N, 0);
  std::vector<char> bad(N, 0);
#pragma omp parallel for schedule(static)
  for (long s = 0; s < N; ++s) {
    const Frame F = frame_at(geo.F, s);
    const Eigen::Matrix3d G = gram_matrix(F);
    const double mu = G.trace() / 3;
    geo.mu[s] = std::abs(mu);
    const int o = is_definite<double>(G, 1) ? 1 : (is_definite<double>(G, -1) ? -1 : 0);
    bool ok = o != 0;
    if (ok) {
      try {
        geo.g.at(s) = reconstruct_metric<double>(F, std::abs(mu)).g;
      } catch (const Error&) {
        ok = false;
      }
    }
    if (ok) {
      geo.orient[s] = o;
      geo.Q[s] = G / mu;
    } else if (!active[s]) {
      const double c = std::sqrt(std::abs(mu) / 2);
      geo.g.at(s) = (c > 0 ? c : 1.0) * Mat4<double>::Identity();
    } else {
      bad[s] = 1;
    }
  }
  std::vector<long> sites;
  for (long s = 0; s < N; ++s)
    if (bad[s]) sites.push_back(s);
  if (!sites.empty()) {
    EscapedError e("curvature is not definite at " + std::to_string(sites.size()) + " active sites");
    e.sites = sites;
    throw e;
  }
  return geo;
}

Geometry geometry(const Field& A) { return geometry_from_curvature(curvature(A)); }

// B F with B = 4Q - (2/3) tr(Q^2) Id.
Field b_curvature(const Geometry& geo) {
  Field out = zeros(geo.F.grid, 2, 3);
  const long N = out.grid.sites();
#pragma omp parallel for schedule(static)
  for (long s = 0; s < N; ++s) {
    if (!geo.orient[s]) continue;
    const Eigen::Matrix3d& Q = geo.Q[s];
    const Eigen::Matrix3d B = 4 * Q - (2.0 / 3.0) * (Q * Q).trace() * Eigen::Matrix3d::Identity();
    Eigen::Map<Frame> o(out.at(s));
    o = frame_at(geo.F, s) * B;
  }
  return out;
}

Field interior_copy(const Field& f) {
  Field r = f;
  zero_frozen(r);
  return r;
}

double local_step_weight(const Mat4<double>& g) { return std::pow(g.determinant(), 0.25); }

}  // namespace

ConnState make_conn_state(const Field& background, const Field& a) {
  const Grid& g = background.grid;
  g.validate();
  if (g.topology == Topology::Periodic)
    throw TopologyError(
        "definite connections need 2 chi + 3 tau > 0, which fails on the 4-torus; use a chart with a frozen "
        "boundary");
  check_connection(background);
  check_connection(a);
  if (!(a.grid == g)) throw Error("perturbation lives on a different grid");
  for (long s = 0; s < g.sites(); ++s)
    if (g.frozen(s))
      for (int k = 0; k < a.block(); ++k)
        if (a.at(s)[k] != 0) throw Error("perturbation must vanish on the frozen layer");
  return {background, a};
}

ConnState make_conn_state(const Field& background) { return make_conn_state(background, zeros(background.grid, 1, 3)); }

Field current_connection(const ConnState& s) {
  Field A = s.background;
  A.data += s.a.data;
  return A;
}

Field bracket(const Field& A, const Field& x) {
  check_connection(A);
  if (x.fibre != 3) throw Error("bracket needs an so(3)-valued form");
  const auto& table = wedge_table(x.degree);
  const int cx = x.comps();
  Field out = zeros(A.grid, x.degree + 1, 3);
  const int co = out.comps();
  const long N = A.grid.sites();
#pragma omp parallel for schedule(static)
  for (long s = 0; s < N; ++s) {
    const double* a = A.at(s);
    const double* xs = x.at(s);
    double* o = out.at(s);
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3, k = (i + 2) % 3;
      for (const WedgeTerm& t : table)
        o[co * i + t.out] += t.sign * (a[4 * j + t.a] * xs[cx * k + t.x] - a[4 * k + t.a] * xs[cx * j + t.x]);
    }
  }
  return out;
}

Field bracket_transpose(const Field& A, const Field& y, int degree) {
  check_connection(A);
  if (y.fibre != 3 || y.degree != degree + 1) throw Error("bracket transpose: shape mismatch");
  const auto& table = wedge_table(degree);
  const int cy = y.comps();
  Field out = zeros(A.grid, degree, 3);
  const int cx = out.comps();
  const long N = A.grid.sites();
#pragma omp parallel for schedule(static)
  for (long s = 0; s < N; ++s) {
    const double* a = A.at(s);
    const double* ys = y.at(s);
    double* o = out.at(s);
    for (int k = 0; k < 3; ++k) {
      const int i1 = (k + 1) % 3, i2 = (k + 2) % 3;
      // x^k = W_{k+2}^T y^{k+1} - W_{k+1}^T y^{k+2}
      for (const WedgeTerm& t : table)
        o[cx * k + t.x] += t.sign * (a[4 * i2 + t.a] * ys[cy * i1 + t.out] - a[4 * i1 + t.a] * ys[cy * i2 + t.out]);
    }
  }
  return out;
}

Field covariant_d(const Field& A, const Field& x) {
  Field out = d_discrete(x);
  out.data += bracket(A, x).data;
  return out;
}

Field covariant_d_transpose(const Field& A, const Field& y, int degree) {
  Field out = d_transpose(y);
  out.data += bracket_transpose(A, y, degree).data;
  return out;
}

Field covariant_codifferential(const Field& A, const Field& y, const MetricField& g) {
  if (y.degree < 1) throw Error("codifferential of a 0-form");
  return apply_mass(covariant_d_transpose(A, apply_mass(y, g), y.degree - 1), g, true);
}

Field curvature(const Field& A) {
  check_connection(A);
  Field F = d_discrete(A);
  F.data += 0.5 * bracket(A, A).data;
  return F;
}

CurvatureData q_mu_sign(const Field& F) {
  check_curvature_field(F);
  const long N = F.grid.sites();
  CurvatureData c;
  c.Q.assign(N, Eigen::Matrix3d::Zero());
  c.mu = zeros(F.grid, 4, 1);
  c.sign.assign(N, 0);
  for (long s = 0; s < N; ++s) {
    const Frame f = frame_at(F, s);
    const Eigen::Matrix3d G = gram_matrix(f);
    const double mu = G.trace() / 3;
    c.mu.data[s] = mu;
    const int o = is_definite<double>(G, 1) ? 1 : (is_definite<double>(G, -1) ? -1 : 0);
    if (o == 0) {
      c.not_definite.push_back(s);
      continue;
    }
    c.Q[s] = G / mu;
    try {
      c.sign[s] = frame_orientation<double>(f, conformal_metric<double>(f));
    } catch (const NotDefiniteError&) {
      c.not_definite.push_back(s);
    }
  }
  return c;
}

MetricField connection_metric(const Field& F) {
  check_curvature_field(F);
  return geometry_from_curvature(F).g;
}

std::vector<char> active_sites(const Grid& g) {
  const long N = g.sites();
  std::vector<char> act(N, 0);
  std::array<AxisOperator, 4> ops;
  for (int mu = 0; mu < 4; ++mu) ops[mu] = axis_operator(g, mu);
  for (long s = 0; s < N; ++s) {
    if (!g.frozen(s)) {
      act[s] = 1;
      continue;
    }
    const std::array<int, 4> c = g.coords(s);
    for (int mu = 0; mu < 4 && !act[s]; ++mu)
      for (const auto& [j, w] : ops[mu].rows[c[mu]]) {
        std::array<int, 4> q = c;
        q[mu] = j;
        if (w != 0 && !g.frozen(g.index(q))) {
          act[s] = 1;
          break;
        }
      }
  }
  return act;
}

double energy_E(const ConnState& s) {
  const Field F = curvature(current_connection(s));
  const Grid& g = F.grid;
  const std::vector<char> active = active_sites(g);
  Accumulator acc;
  std::vector<long> bad;
  for (long x = 0; x < g.sites(); ++x) {
    if (!active[x]) continue;
    const Eigen::Matrix3d G = gram_matrix(frame_at(F, x));
    if (!is_definite<double>(G, 1) && !is_definite<double>(G, -1)) {
      bad.push_back(x);
      continue;
    }
    acc.add((G * G).trace() / std::abs(G.trace() / 3));
  }
  if (!bad.empty()) {
    EscapedError e("curvature is not definite at " + std::to_string(bad.size()) + " active sites");
    e.sites = bad;
    throw e;
  }
  return acc.value() * g.cell_volume();
}

double active_mu_integral(const Field& F) {
  check_curvature_field(F);
  const std::vector<char> active = active_sites(F.grid);
  Accumulator acc;
  for (long s = 0; s < F.grid.sites(); ++s)
    if (active[s]) acc.add(std::abs(mu_of<double>(frame_at(F, s))));
  return acc.value() * F.grid.cell_volume();
}

double chern_weil_chart(const Field& F) {
  check_curvature_field(F);
  Accumulator acc;
  for (long s = 0; s < F.grid.sites(); ++s) acc.add(mu_of<double>(frame_at(F, s)));
  return acc.value() * F.grid.cell_volume();
}

double chern_weil_round_s4(double half) {
  // Composite Gauss-Legendre on [0, half] per axis, 16 nodes per panel.
  const int n = 16;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  std::vector<double> edges{0};
  for (double e = 0.5; e < half; e *= 2) edges.push_back(e);
  edges.push_back(half);
  std::vector<double> x, w;
  for (size_t p = 0; p + 1 < edges.size(); ++p) {
    const double a = edges[p], b = edges[p + 1];
    for (int i = 0; i < n; ++i) {
      x.push_back(0.5 * (a + b) + 0.5 * (b - a) * es.eigenvalues()(i));
      w.push_back((b - a) * std::pow(es.eigenvectors()(0, i), 2));
    }
  }
  const size_t m = x.size();
  double total = 0;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j) {
      double part = 0;
      const double rij = x[i] * x[i] + x[j] * x[j];
      for (size_t k = 0; k < m; ++k)
        for (size_t l = 0; l < m; ++l) {
          const double q = 1 + rij + x[k] * x[k] + x[l] * x[l];
          part += w[k] * w[l] / (q * q * q * q);
        }
      total += w[i] * w[j] * part;
    }
  return 16 * 32 * total;
}

Eigen::Matrix3d L_apply(const Frame& F, const Frame& T) {
  const double mu = mu_of<double>(F);
  Eigen::Matrix3d M;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      M(i, j) = (wedge_pair<double>(T.col(i), F.col(j)) + wedge_pair<double>(T.col(j), F.col(i))) / (2 * mu);
  return M;
}

Frame L_star_apply(const Frame& F, const Eigen::Matrix3d& M) { return F * M.transpose(); }

Field S_apply(const Field& F, const Field& u) {
  check_curvature_field(F);
  if (u.degree != 0 || u.fibre != 4) throw Error("S acts on vector fields");
  Field out = zeros(F.grid, 1, 3);
  const long N = F.grid.sites();
#pragma omp parallel for schedule(static)
  for (long s = 0; s < N; ++s) {
    const Vec4<double> v = Eigen::Map<const Vec4<double>>(u.at(s));
    for (int i = 0; i < 3; ++i)
      Eigen::Map<Form1<double>>(out.at(s) + 4 * i) =
          interior<2>(v, Form2<double>(Eigen::Map<const Form2<double>>(F.at(s) + 6 * i)));
  }
  return out;
}

Field S_star_apply(const Field& F, const MetricField& g, const Field& b) {
  check_curvature_field(F);
  if (b.degree != 1 || b.fibre != 3) throw Error("S* acts on so(3)-valued 1-forms");
  Field out = zeros(F.grid, 0, 4);
  const long N = F.grid.sites();
#pragma omp parallel for schedule(static)
  for (long s = 0; s < N; ++s) {
    const Mat4<double> gi = g.at(s).inverse();
    Vec4<double> acc = Vec4<double>::Zero();
    for (int i = 0; i < 3; ++i) {
      // <i_u F_i, b_i> = u^mu F_i(mu, nu) (g^{-1} b_i)_nu
      const Mat4<double> Fi = as_matrix<double>(Form2<double>(Eigen::Map<const Form2<double>>(F.at(s) + 6 * i)));
      const Vec4<double> bi = Eigen::Map<const Vec4<double>>(b.at(s) + 4 * i);
      acc += Fi * (gi * bi);
    }
    Eigen::Map<Vec4<double>>(out.at(s)) = gi * acc;
  }
  return out;
}

double vector_inner(const Field& u, const Field& v, const MetricField& g) {
  if (u.degree != 0 || u.fibre != 4 || v.degree != 0 || v.fibre != 4) throw Error("vector fields expected");
  double acc = 0;
  for (long s = 0; s < u.grid.sites(); ++s) {
    const Mat4<double> gm = g.at(s);
    acc += std::sqrt(gm.determinant()) * Eigen::Map<const Vec4<double>>(u.at(s)).dot(gm * Eigen::Map<const Vec4<double>>(v.at(s)));
  }
  return acc * u.grid.cell_volume();
}

Field vector_laplacian(const MetricField& g, const Field& u) {
  if (u.degree != 0 || u.fibre != 4) throw Error("vector Laplacian acts on vector fields");
  const Grid& grid = u.grid;
  const long N = grid.sites();
  const double w = grid.cell_volume();
  Field gf = zeros(grid, 0, 16);
  gf.data = g.data;
  const Field dg = d_discrete(gf);  // (s, 4 * (4 c + r) + mu) = D_mu g_rc
  // Gamma^s_{mu nu} at index 16 s + 4 mu + nu.
  Eigen::VectorXd gamma(64 * N);
#pragma omp parallel for schedule(static)
  for (long x = 0; x < N; ++x) {
    const Mat4<double> gi = g.at(x).inverse();
    const double* d = dg.at(x);
    auto D = [&](int mu, int r, int c) { return d[4 * (4 * c + r) + mu]; };
    double low[4][4][4];
    for (int r = 0; r < 4; ++r)
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu) low[r][mu][nu] = 0.5 * (D(mu, r, nu) + D(nu, r, mu) - D(r, mu, nu));
    for (int s = 0; s < 4; ++s)
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu) {
          double v = 0;
          for (int r = 0; r < 4; ++r) v += gi(s, r) * low[r][mu][nu];
          gamma[64 * x + 16 * s + 4 * mu + nu] = v;
        }
  }
  // nabla u: (s, 4 sigma + mu) = D_mu u^sigma + Gamma^sigma_{mu nu} u^nu, then mass.
  Field T = d_discrete(u);
#pragma omp parallel for schedule(static)
  for (long x = 0; x < N; ++x) {
    const double* uu = u.at(x);
    double* t = T.at(x);
    for (int s = 0; s < 4; ++s)
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu) t[4 * s + mu] += gamma[64 * x + 16 * s + 4 * mu + nu] * uu[nu];
    const Mat4<double> gm = g.at(x);
    const double vol = w * std::sqrt(gm.determinant());
    Eigen::Map<Eigen::Matrix<double, 4, 4, Eigen::RowMajor>> Tm(t);
    Tm = vol * gm * Tm * gm.inverse();
  }
  Field out = d_transpose(T);
#pragma omp parallel for schedule(static)
  for (long x = 0; x < N; ++x) {
    const double* t = T.at(x);
    double* o = out.at(x);
    for (int s = 0; s < 4; ++s)
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu) o[nu] += gamma[64 * x + 16 * s + 4 * mu + nu] * t[4 * s + mu];
    const Mat4<double> gm = g.at(x);
    const double vol = w * std::sqrt(gm.determinant());
    Eigen::Map<Vec4<double>> ov(o);
    ov = gm.inverse() * ov / vol;
  }
  return out;
}

std::string to_string(FlowMode m) {
  switch (m) {
    case FlowMode::Plain: return "plain";
    case FlowMode::Adjusted: return "adjusted";
    default: return "stabilized";
  }
}

FlowMode flow_mode_from_string(const std::string& s) {
  if (s == "plain") return FlowMode::Plain;
  if (s == "adjusted") return FlowMode::Adjusted;
  if (s == "stabilized") return FlowMode::Stabilized;
  throw Error("unknown flow mode '" + s + "'");
}

namespace {

Field rhs_from_geometry(const ConnState& st, const Field& A, const Geometry& geo, FlowMode mode) {
  Field r = covariant_codifferential(A, b_curvature(geo), geo.g);
  r.data = -r.data;
  if (mode != FlowMode::Plain) {
    const Field a = interior_copy(st.a);
    // -d_A d_A* a
    const Field dd = covariant_d(A, covariant_codifferential(A, a, geo.g));
    r.data -= dd.data;
    if (mode == FlowMode::Adjusted) {
      const Field lap = covariant_codifferential(A, covariant_d(A, a), geo.g);
      r.data -= S_apply(geo.F, S_star_apply(geo.F, geo.g, lap)).data;
    } else {
      const Field u = S_star_apply(geo.F, geo.g, a);
      r.data -= S_apply(geo.F, vector_laplacian(geo.g, u)).data;
    }
  }
  zero_frozen(r);
  return r;
}

}  // namespace

Field flow_rhs(const ConnState& s, FlowMode mode) {
  const Field A = current_connection(s);
  return rhs_from_geometry(s, A, geometry(A), mode);
}

ConnQStats conn_q_stats(const Field& F) {
  ConnQStats st;
  st.min_eig = 1e300;
  const Grid& g = F.grid;
  for (long s = 0; s < g.sites(); ++s) {
    if (g.frozen(s)) continue;
    const Eigen::Matrix3d G = gram_matrix(frame_at(F, s));
    const Eigen::Matrix3d Q = G / (G.trace() / 3);
    st.sup_dev = std::max(st.sup_dev, (Q - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
    st.min_eig = std::min(st.min_eig, Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(Q).eigenvalues()(0));
  }
  return st;
}

ConnFlowResult run_flow(const ConnState& s0, const ConnFlowConfig& cfg) {
  ConnFlowResult res;
  res.state = s0;
  const Grid& grid = s0.a.grid;
  const long N = grid.sites();
  Field A = current_connection(s0);
  Geometry geo;
  try {
    geo = geometry(A);
  } catch (const EscapedError& e) {
    FlowEscapeError f(std::string("initial connection: ") + e.what());
    f.sites = e.sites;
    throw f;
  }
  // Local time stepping: the flow is scaled by the conformal size of g_A at
  // the start, which keeps fixed points and evens out the explicit step limit.
  std::vector<double> P(N, 1.0);
  if (cfg.local_time_stepping)
    for (long x = 0; x < N; ++x) P[x] = local_step_weight(geo.g.at(x));
  auto precondition = [&](Field& f) {
    const int b = f.block();
    for (long x = 0; x < N; ++x)
      for (int k = 0; k < b; ++k) f.at(x)[k] *= P[x];
  };

  const std::vector<char> active = active_sites(grid);
  std::vector<int> sign0 = q_mu_sign(geo.F).sign;
  double t = 0;
  double E = energy_E(res.state);
  auto log = [&](int step, double tau, int halvings) {
    ConnFlowRow row;
    row.step = step;
    row.t = t;
    row.E = E;
    const ConnQStats q = conn_q_stats(geo.F);
    row.sup_Q_dev = q.sup_dev;
    row.min_eig_Q = q.min_eig;
    row.bianchi_res = rms(covariant_d(A, geo.F));
    const CurvatureData c = q_mu_sign(geo.F);
    // |mu| over the energy domain, so that E - 3 * interior_volume >= 0.
    Accumulator vol;
    for (long x = 0; x < N; ++x) {
      if (!active[x]) continue;
      if (!grid.frozen(x) && c.sign[x] != sign0[x]) ++row.sign_flips;
      vol.add(std::abs(c.mu.data[x]));
    }
    row.interior_volume = vol.value() * grid.cell_volume();
    row.step_size = tau;
    row.ls_halvings = halvings;
    res.rows.push_back(row);
    return q.sup_dev;
  };
  const double dev0 = log(0, 0, 0);
  const double goal = std::max(cfg.tolerance, cfg.target_reduction > 0 ? dev0 / cfg.target_reduction : 0.0);
  if (dev0 <= goal) {
    res.converged = true;
    return res;
  }

  double tau_explicit = 0;
  if (cfg.mode != FlowMode::Plain) {
    // Power iteration on the linearised, preconditioned flow at the start.
    const Field r0 = rhs_from_geometry(res.state, A, geo, cfg.mode);
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> gauss;
    Field v = zeros(grid, 1, 3);
    for (long i = 0; i < v.data.size(); ++i) v.data[i] = gauss(rng);
    zero_frozen(v);
    double lambda = 0;
    for (int it = 0; it < cfg.power_iterations; ++it) {
      v.data /= v.data.norm();
      const double eps = 1e-6 * std::max(1.0, max_abs(A));
      ConnState p = res.state;
      p.a.data += eps * v.data;
      const Field Ap = current_connection(p);
      Field jv = rhs_from_geometry(p, Ap, geometry(Ap), cfg.mode);
      jv.data = -(jv.data - r0.data) / eps;
      precondition(jv);
      lambda = jv.data.norm();
      v = jv;
    }
    res.lambda_max = lambda;
    if (!(lambda > 0)) throw StepError("could not estimate the explicit step limit");
    tau_explicit = cfg.cfl / lambda;
  }

  Field residual = zeros(grid, 1, 3);
  if (cfg.mode != FlowMode::Plain && cfg.subtract_background_residual) {
    const ConnState bg{s0.background, zeros(grid, 1, 3)};
    residual = rhs_from_geometry(bg, s0.background, geometry(s0.background), cfg.mode);
  }

  const double h = grid.spacing[0];
  double tau_plain = cfg.step_factor * h * h;
  for (int step = 1; step <= cfg.max_steps; ++step) {
    Field dir = rhs_from_geometry(res.state, A, geo, cfg.mode);
    dir.data -= residual.data;
    Field pdir = dir;
    precondition(pdir);
    double tau = cfg.mode == FlowMode::Plain ? tau_plain : tau_explicit;
    const double slope = cfg.mode == FlowMode::Plain ? l2_inner(dir, pdir, geo.g) : 0.0;
    int halvings = 0;
    for (;; ++halvings) {
      if (halvings > cfg.max_halvings)
        throw StepError("step rejected " + std::to_string(cfg.max_halvings) + " times");
      ConnState trial = res.state;
      trial.a.data += tau * pdir.data;
      const Field At = current_connection(trial);
      try {
        Geometry gt = geometry(At);
        const double Et = energy_E(trial);
        if (cfg.mode != FlowMode::Plain || (Et < E && Et <= E - cfg.armijo * tau * slope) ||
            (Et <= E && slope == 0)) {
          res.state = std::move(trial);
          A = At;
          geo = std::move(gt);
          E = Et;
          break;
        }
      } catch (const EscapedError&) {
      }
      tau *= 0.5;
    }
    if (cfg.mode == FlowMode::Plain) tau_plain = 2 * tau;
    t += tau;
    const bool last = step == cfg.max_steps;
    if (step % std::max(1, cfg.log_every) == 0 || last || cfg.mode == FlowMode::Plain) {
      if (log(step, tau, halvings) <= goal) {
        res.converged = true;
        break;
      }
    }
  }
  return res;
}

void write_connection_csv(const std::string& path, const std::vector<ConnFlowRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(17);
  out << "step,t,E,sup_Q_dev,min_eig_Q,bianchi_res,sign_flips,interior_volume,step_size,ls_halvings\n";
  for (const auto& r : rows)
    out << r.step << ',' << r.t << ',' << r.E << ',' << r.sup_Q_dev << ',' << r.min_eig_Q << ',' << r.bianchi_res
        << ',' << r.sign_flips << ',' << r.interior_volume << ',' << r.step_size << ',' << r.ls_halvings << '\n';
}

Field round_s4_frame(const Grid& g) {
  const Frame th0 = standard_triple<double>();
  return sample(g, 2, 3, [&](const Vec4<double>& x, double* v) {
    const double r2 = x.squaredNorm();
    Eigen::Map<Frame> out(v);
    out = 4 / ((1 + r2) * (1 + r2)) * th0;
  });
}

Field background_round_s4(const Grid& g) {
  const Frame th0 = standard_triple<double>();
  return sample(g, 1, 3, [&](const Vec4<double>& x, double* v) {
    const double r2 = x.squaredNorm();
    const double W2 = 4 / ((1 + r2) * (1 + r2));
    Metric4<double> m;
    m.g = W2 * Mat4<double>::Identity();
    const Form1<double> dW2 = -16.0 / std::pow(1 + r2, 3) * x;
    Eigen::Matrix<double, 4, 3> dth;
    for (int i = 0; i < 3; ++i) dth.col(i) = wedge<1, 2>(dW2, Form2<double>(th0.col(i)));
    Eigen::Map<Conn> out(v);
    out = connection_from_frame<double>(m, Frame(W2 * th0), dth);
  });
}

Field interior_perturbation(const ConnState& s, double amplitude, std::uint64_t seed, double support) {
  const Grid& g = s.a.grid;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  // Radial bump times a random affine so(3)-valued 1-form.
  Eigen::Matrix<double, 12, 5> c;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 5; ++j) c(i, j) = gauss(rng);
  Field a = sample(g, 1, 3, [&](const Vec4<double>& x, double* v) {
    const double r = x.norm();
    if (r >= support) return;
    const double bump = std::pow(std::cos(0.5 * std::numbers::pi * r / support), 2);
    Eigen::Matrix<double, 5, 1> basis;
    basis << 1, x(0) / support, x(1) / support, x(2) / support, x(3) / support;
    Eigen::Map<Eigen::Matrix<double, 12, 1>> out(v);
    out = bump * c * basis;
  });
  zero_frozen(a);
  const double m = max_abs(a);
  if (m > 0) a.data *= amplitude * max_abs(s.background) / m;
  return a;
}

double bianchi_residual(const Field& A) { return rms(covariant_d(A, curvature(A))); }

double torsion_residual(const Field& A, const Field& theta) {
  check_curvature_field(theta);
  return rms(covariant_d(A, theta));
}

GOperator::GOperator(const ConnState& s) {
  A_ = current_connection(s);
  Geometry geo = geometry(A_);
  F_ = std::move(geo.F);
  g_ = std::move(geo.g);
  orient_ = std::move(geo.orient);
  active_ = active_sites(A_.grid);
}

Field GOperator::apply(const Field& b0) const {
  const Field b = interior_copy(b0);
  const long N = b.grid.sites();
  // d_A*(K d_A b), K = L* Pi Theta Pi L pointwise.
  Field db = covariant_d(A_, b);
#pragma omp parallel for schedule(static)
  for (long s = 0; s < N; ++s) {
    if (!active_[s]) {
      std::fill(db.at(s), db.at(s) + 18, 0.0);
      continue;
    }
    SymbolData d;
    d.F = frame_at(F_, s);
    d.mu = mu_of<double>(d.F);
    d.Q = gram_matrix(d.F) / d.mu;
    const Frame T = frame_at(db, s);
    const Eigen::Matrix3d M = Pi_apply(d, Theta_apply(d, Pi_apply(d, L_apply(d.F, T))));
    Eigen::Map<Frame>(db.at(s)) = L_star_apply(d.F, M);
  }
  Field out = covariant_codifferential(A_, db, g_);
  out.data += S_apply(F_, vector_laplacian(g_, S_star_apply(F_, g_, b))).data;
  out.data += covariant_d(A_, covariant_codifferential(A_, b, g_)).data;
  zero_frozen(out);
  return out;
}

double GOperator::inner(const Field& a, const Field& b) const { return l2_inner(a, b, g_); }

Field GOperator::random_interior(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Field b = zeros(A_.grid, 1, 3);
  for (long i = 0; i < b.data.size(); ++i) b.data[i] = gauss(rng);
  zero_frozen(b);
  return b;
}

Field g_operator_apply(const ConnState& s, const Field& b) { return GOperator(s).apply(b); }

GReport g_operator_check(const ConnState& s, int pairs, int samples, int lanczos_steps, std::uint64_t seed) {
  const GOperator G(s);
  GReport r;
  r.pairs = pairs;
  r.samples = samples;
  std::uint64_t k = seed;
  for (int p = 0; p < pairs; ++p) {
    const Field a = G.random_interior(k++), b = G.random_interior(k++);
    const double ab = G.inner(G.apply(a), b), ba = G.inner(a, G.apply(b));
    r.max_asymmetry = std::max(r.max_asymmetry, std::abs(ab - ba) / std::max(std::abs(ab), std::abs(ba)));
  }
  r.min_rayleigh = 1e300;
  for (int q = 0; q < samples; ++q) {
    const Field b = G.random_interior(k++);
    r.min_rayleigh = std::min(r.min_rayleigh, G.inner(G.apply(b), b) / G.inner(b, b));
  }
  if (lanczos_steps > 0) {
    // Lanczos in the M1 product; the smallest Ritz value estimates the bottom
    // of the spectrum on interior fields.
    Field v = G.random_interior(k++);
    v.data /= std::sqrt(G.inner(v, v));
    Field vprev = zeros(v.grid, 1, 3);
    std::vector<double> alpha, beta;
    double bprev = 0;
    for (int j = 0; j < lanczos_steps; ++j) {
      Field w = G.apply(v);
      const double a = G.inner(w, v);
      w.data -= a * v.data + bprev * vprev.data;
      alpha.push_back(a);
      const double bn = std::sqrt(std::max(0.0, G.inner(w, w)));
      if (bn < 1e-300) break;
      beta.push_back(bn);
      vprev = std::move(v);
      v = std::move(w);
      v.data /= bn;
      bprev = bn;
    }
    const int m = int(alpha.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    r.min_eig_estimate = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T).eigenvalues()(0);
  }
  return r;
}

}  // namespace defcon
