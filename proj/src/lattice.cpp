#include "defcon/lattice.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace defcon {

std::string to_string(Topology t) { return t == Topology::Periodic ? "periodic" : "chart"; }

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Centered: return "centered";
    case Scheme::Centered4: return "centered4";
    default: return "spectral";
  }
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "centered") return Scheme::Centered;
  if (s == "centered4") return Scheme::Centered4;
  if (s == "spectral") return Scheme::Spectral;
  throw Error("unknown scheme '" + s + "'");
}

int Grid::stencil_radius() const { return scheme == Scheme::Centered4 ? 2 : 1; }

void Grid::validate() const {
  for (int a = 0; a < 4; ++a) {
    if (shape[a] < 4) throw Error("grid shape entries must be >= 4");
    if (!(spacing[a] > 0)) throw Error("grid spacing must be positive");
  }
  if (topology == Topology::ChartFrozenBoundary) {
    if (scheme == Scheme::Spectral) throw Error("spectral scheme needs periodic topology");
    if (width < stencil_radius()) throw Error("frozen boundary narrower than the stencil");
    for (int a = 0; a < 4; ++a)
      if (shape[a] <= 2 * width) throw Error("frozen boundary leaves no interior");
  }
  if (scheme == Scheme::Centered4)
    for (int a = 0; a < 4; ++a)
      if (shape[a] < 5) throw Error("centered4 needs at least 5 sites per axis");
}

long Grid::stride(int axis) const {
  long s = 1;
  for (int a = 3; a > axis; --a) s *= shape[a];
  return s;
}

long Grid::index(const std::array<int, 4>& c) const {
  return ((long(c[0]) * shape[1] + c[1]) * shape[2] + c[2]) * shape[3] + c[3];
}

std::array<int, 4> Grid::coords(long s) const {
  std::array<int, 4> c;
  for (int a = 3; a >= 0; --a) {
    c[a] = int(s % shape[a]);
    s /= shape[a];
  }
  return c;
}

Vec4<double> Grid::position(long s) const {
  const auto c = coords(s);
  Vec4<double> x;
  for (int a = 0; a < 4; ++a) x(a) = origin[a] + c[a] * spacing[a];
  return x;
}

bool Grid::frozen(long s) const {
  if (topology == Topology::Periodic) return false;
  const auto c = coords(s);
  for (int a = 0; a < 4; ++a)
    if (c[a] < width || c[a] >= shape[a] - width) return true;
  return false;
}

Grid periodic_grid(int n, double length, Scheme scheme) {
  Grid g;
  g.shape = {n, n, n, n};
  const double h = length / n;
  g.spacing = {h, h, h, h};
  g.scheme = scheme;
  g.validate();
  return g;
}

Grid chart_grid(int n, double half, int width, Scheme scheme) {
  Grid g;
  g.shape = {n, n, n, n};
  const double h = 2 * half / n;
  g.spacing = {h, h, h, h};
  g.origin = {-half + h / 2, -half + h / 2, -half + h / 2, -half + h / 2};
  g.topology = Topology::ChartFrozenBoundary;
  g.width = width;
  g.scheme = scheme;
  g.validate();
  return g;
}

Field zeros(const Grid& g, int degree, int fibre) {
  Field f;
  f.grid = g;
  f.degree = degree;
  f.fibre = fibre;
  f.data = Eigen::VectorXd::Zero(g.sites() * fibre * binom4(degree));
  return f;
}

Field sample(const Grid& g, int degree, int fibre, const std::function<void(const Vec4<double>&, double*)>& fn) {
  Field f = zeros(g, degree, fibre);
  for (long s = 0; s < g.sites(); ++s) fn(g.position(s), f.at(s));
  return f;
}

MetricField euclidean_metric(const Grid& g) {
  MetricField m;
  m.grid = g;
  m.data.resize(16 * g.sites());
  for (long s = 0; s < g.sites(); ++s) m.at(s) = Mat4<double>::Identity();
  return m;
}

AxisOperator axis_operator(const Grid& g, int axis) {
  const int n = g.shape[axis];
  const double h = g.spacing[axis];
  const bool periodic = g.topology == Topology::Periodic;
  AxisOperator op;
  op.n = n;
  op.rows.resize(n);
  auto wrap = [n](int j) { return ((j % n) + n) % n; };
  auto put = [&](int i, int j, double c) { op.rows[i].push_back({j, c}); };
  switch (g.scheme) {
    case Scheme::Centered:
      for (int i = 0; i < n; ++i) {
        if (periodic || (i > 0 && i < n - 1)) {
          put(i, wrap(i - 1), -0.5 / h);
          put(i, wrap(i + 1), 0.5 / h);
        } else if (i == 0) {
          put(i, 0, -1.5 / h); put(i, 1, 2.0 / h); put(i, 2, -0.5 / h);
        } else {
          put(i, n - 3, 0.5 / h); put(i, n - 2, -2.0 / h); put(i, n - 1, 1.5 / h);
        }
      }
      break;
    case Scheme::Centered4: {
      const double c = 1.0 / (12 * h);
      for (int i = 0; i < n; ++i) {
        if (periodic || (i > 1 && i < n - 2)) {
          const double w[5] = {1, -8, 0, 8, -1};
          for (int k = 0; k < 5; ++k)
            if (w[k] != 0) put(i, wrap(i - 2 + k), w[k] * c);
        } else {
          static const double edge[2][5] = {{-25, 48, -36, 16, -3}, {-3, -10, 18, -6, 1}};
          if (i < 2) {
            for (int k = 0; k < 5; ++k) put(i, k, edge[i][k] * c);
          } else {
            const int m = n - 1 - i;
            for (int k = 0; k < 5; ++k) put(i, n - 1 - k, -edge[m][k] * c);
          }
        }
      }
      break;
    }
    case Scheme::Spectral: {
      if (!periodic) throw Error("spectral scheme needs periodic topology");
      const double L = n * h;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (i == j) continue;
          const double t = (i - j) * std::numbers::pi / n;
          const double sgn = ((i - j) % 2 == 0) ? 1.0 : -1.0;
          const double v = (n % 2 == 0) ? 0.5 * sgn / std::tan(t) : 0.5 * sgn / std::sin(t);
          put(i, j, v * 2 * std::numbers::pi / L);
        }
      break;
    }
  }
  op.cols.resize(n);
  for (int i = 0; i < n; ++i)
    for (auto [j, c] : op.rows[i]) op.cols[j].push_back({i, c});
  return op;
}

void apply_axis(const Grid& g, const AxisOperator& op, int axis, const double* in, double* out, int block,
                bool transpose) {
  const long st = g.stride(axis);
  const long N = g.sites();
  const auto& R = transpose ? op.cols : op.rows;
  const int n = op.n;
#pragma omp parallel for schedule(static)
  for (long s = 0; s < N; ++s) {
    const int i = int((s / st) % n);
    const long base = s - long(i) * st;
    double* o = out + s * block;
    for (auto [j, c] : R[i]) {
      const double* src = in + (base + long(j) * st) * block;
      for (int b = 0; b < block; ++b) o[b] += c * src[b];
    }
  }
}

namespace {

struct DEntry {
  int in, out, sign;
};

// Entries of dx^mu ^ (.) from degree p to p+1.
std::vector<DEntry> d_table(int p, int mu) {
  std::vector<DEntry> t;
  const detail::Basis bi = detail::basis(p);
  for (int i = 0; i < bi.n; ++i) {
    int v[4];
    v[0] = mu;
    for (int m = 0; m < p; ++m) v[1 + m] = bi.idx[i][m];
    const int s = detail::perm_sign(v, p + 1);
    if (s == 0) continue;
    int sorted[4];
    std::copy(v, v + p + 1, sorted);
    std::sort(sorted, sorted + p + 1);
    t.push_back({i, detail::index_of(sorted, p + 1), s});
  }
  return t;
}

}  // namespace

Field d_discrete(const Field& f) {
  if (f.degree > 3) throw Error("d of a 4-form");
  const Grid& g = f.grid;
  Field out = zeros(g, f.degree + 1, f.fibre);
  Field tmp = zeros(g, f.degree, f.fibre);
  const int ci = f.comps(), co = out.comps(), k = f.fibre;
  for (int mu = 0; mu < 4; ++mu) {
    const AxisOperator op = axis_operator(g, mu);
    tmp.data.setZero();
    apply_axis(g, op, mu, f.data.data(), tmp.data.data(), f.block());
    const auto tab = d_table(f.degree, mu);
    const long N = g.sites();
#pragma omp parallel for schedule(static)
    for (long s = 0; s < N; ++s) {
      const double* t = tmp.at(s);
      double* o = out.at(s);
      for (int a = 0; a < k; ++a)
        for (const auto& e : tab) o[a * co + e.out] += e.sign * t[a * ci + e.in];
    }
  }
  return out;
}

Field d_transpose(const Field& f) {
  if (f.degree < 1) throw Error("transpose of d into degree -1");
  const Grid& g = f.grid;
  Field out = zeros(g, f.degree - 1, f.fibre);
  Field tmp = zeros(g, f.degree - 1, f.fibre);
  const int ci = tmp.comps(), co = f.comps(), k = f.fibre;
  for (int mu = 0; mu < 4; ++mu) {
    const AxisOperator op = axis_operator(g, mu);
    const auto tab = d_table(f.degree - 1, mu);
    const long N = g.sites();
#pragma omp parallel for schedule(static)
    for (long s = 0; s < N; ++s) {
      const double* y = f.at(s);
      double* t = tmp.at(s);
      for (int a = 0; a < k * ci; ++a) t[a] = 0;
      for (int a = 0; a < k; ++a)
        for (const auto& e : tab) t[a * ci + e.in] += e.sign * y[a * co + e.out];
    }
    apply_axis(g, op, mu, tmp.data.data(), out.data.data(), tmp.block(), true);
  }
  return out;
}

namespace {

template <int P>
void mass_sites(const Field& f, const MetricField& g, bool inverse, Field& out) {
  constexpr int C = binom4(P);
  const double w = f.grid.cell_volume();
  const long N = f.grid.sites();
#pragma omp parallel for schedule(static)
  for (long s = 0; s < N; ++s) {
    Metric4<double> m;
    m.g = g.at(s);
    Eigen::Matrix<double, C, C> H = form_metric<P>(m) * (w * std::sqrt(m.g.determinant()));
    if (inverse) H = H.inverse().eval();
    for (int a = 0; a < f.fibre; ++a) {
      Eigen::Map<const Eigen::Matrix<double, C, 1>> x(f.at(s) + a * C);
      Eigen::Map<Eigen::Matrix<double, C, 1>> y(out.at(s) + a * C);
      y = H * x;
    }
  }
}

}  // namespace

Field apply_mass(const Field& f, const MetricField& g, bool inverse) {
  Field out = zeros(f.grid, f.degree, f.fibre);
  switch (f.degree) {
    case 0: mass_sites<0>(f, g, inverse, out); break;
    case 1: mass_sites<1>(f, g, inverse, out); break;
    case 2: mass_sites<2>(f, g, inverse, out); break;
    case 3: mass_sites<3>(f, g, inverse, out); break;
    default: mass_sites<4>(f, g, inverse, out); break;
  }
  return out;
}

double l2_inner(const Field& a, const Field& b, const MetricField& g) {
  const Field mb = apply_mass(b, g);
  double acc = 0;
  for (long i = 0; i < a.data.size(); ++i) acc += a.data[i] * mb.data[i];
  return acc;
}

Field codifferential(const Field& f, const MetricField& g) {
  if (f.degree < 1) throw Error("codifferential of a 0-form");
  return apply_mass(d_transpose(apply_mass(f, g)), g, true);
}

double integrate(const Field& f) {
  double acc = 0;
  for (long i = 0; i < f.data.size(); ++i) acc += f.data[i];
  return acc * f.grid.cell_volume();
}

void axpy(double a, const Field& x, Field& y) { y.data += a * x.data; }

double max_abs(const Field& f) { return f.data.size() ? f.data.cwiseAbs().maxCoeff() : 0.0; }

void write_snapshot(const std::string& path, const Field& f, const std::string& convention) {
  static_assert(std::endian::native == std::endian::little, "snapshot writer assumes little-endian host");
  nlohmann::json h;
  h["shape"] = f.grid.shape;
  h["spacing"] = f.grid.spacing;
  h["origin"] = f.grid.origin;
  h["topology"] = to_string(f.grid.topology);
  h["width"] = f.grid.width;
  h["scheme"] = to_string(f.grid.scheme);
  h["fibre"] = f.fibre;
  h["degree"] = f.degree;
  h["convention"] = convention;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path);
  os << h.dump() << '\n';
  os.write(reinterpret_cast<const char*>(f.data.data()), std::streamsize(f.data.size() * sizeof(double)));
}

Field read_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  std::string line;
  std::getline(is, line);
  const auto h = nlohmann::json::parse(line);
  Grid g;
  g.shape = h.at("shape").get<std::array<int, 4>>();
  g.spacing = h.at("spacing").get<std::array<double, 4>>();
  g.origin = h.at("origin").get<std::array<double, 4>>();
  g.topology = h.at("topology").get<std::string>() == "periodic" ? Topology::Periodic : Topology::ChartFrozenBoundary;
  g.width = h.at("width").get<int>();
  g.scheme = scheme_from_string(h.at("scheme").get<std::string>());
  g.validate();
  Field f = zeros(g, h.at("degree").get<int>(), h.at("fibre").get<int>());
  is.read(reinterpret_cast<char*>(f.data.data()), std::streamsize(f.data.size() * sizeof(double)));
  if (!is) throw Error("truncated snapshot " + path);
  return f;
}

}  // namespace defcon
