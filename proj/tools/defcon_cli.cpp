// Experiment driver: flows, verification suite, index table, moment report
// and trajectory summaries.
//
// Exit codes: 0 ok, 1 failed verdict, 2 config or input error, 3 flow left
// the definite locus or could not step, 4 flow did not converge.

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "defcon/checks.hpp"
#include "defcon/connection_lab.hpp"
#include "defcon/lattice.hpp"
#include "defcon/moment_map.hpp"
#include "defcon/topology.hpp"
#include "defcon/triple_lab.hpp"

using namespace defcon;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string experiment;
  // grid
  std::optional<int> n, width;
  std::optional<double> half, length;
  std::optional<std::string> scheme;
  // perturbation
  std::optional<std::uint64_t> seed;
  std::optional<double> amplitude, support;
  // flow
  std::optional<std::string> mode;
  std::optional<int> max_steps, log_every;
  std::optional<double> tolerance, target_reduction, cfl;
  // output
  std::optional<std::string> csv, snapshot, report;
};

void reject_unknown(const json& obj, const std::vector<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read_key(const json& obj, const char* key, std::optional<T>& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad type for '" + std::string(key) + "' in " + where);
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  reject_unknown(j, {"schema_version", "experiment", "grid", "perturbation", "flow", "output"}, "config");
  if (!j.contains("schema_version") || j["schema_version"] != kSchemaVersion)
    throw ConfigError("config needs schema_version " + std::to_string(kSchemaVersion));
  RunConfig c;
  if (!j.contains("experiment") || !j["experiment"].is_string()) throw ConfigError("config needs an experiment name");
  c.experiment = j["experiment"].get<std::string>();
  if (j.contains("grid")) {
    const json& g = j["grid"];
    reject_unknown(g, {"n", "half", "length", "width", "scheme"}, "grid");
    read_key(g, "n", c.n, "grid");
    read_key(g, "half", c.half, "grid");
    read_key(g, "length", c.length, "grid");
    read_key(g, "width", c.width, "grid");
    read_key(g, "scheme", c.scheme, "grid");
  }
  if (j.contains("perturbation")) {
    const json& p = j["perturbation"];
    reject_unknown(p, {"seed", "amplitude", "support"}, "perturbation");
    read_key(p, "seed", c.seed, "perturbation");
    read_key(p, "amplitude", c.amplitude, "perturbation");
    read_key(p, "support", c.support, "perturbation");
  }
  if (j.contains("flow")) {
    const json& f = j["flow"];
    reject_unknown(f, {"mode", "max_steps", "tolerance", "target_reduction", "cfl", "log_every"}, "flow");
    read_key(f, "mode", c.mode, "flow");
    read_key(f, "max_steps", c.max_steps, "flow");
    read_key(f, "tolerance", c.tolerance, "flow");
    read_key(f, "target_reduction", c.target_reduction, "flow");
    read_key(f, "cfl", c.cfl, "flow");
    read_key(f, "log_every", c.log_every, "flow");
  }
  if (j.contains("output")) {
    const json& o = j["output"];
    reject_unknown(o, {"csv", "snapshot", "report"}, "output");
    read_key(o, "csv", c.csv, "output");
    read_key(o, "snapshot", c.snapshot, "output");
    read_key(o, "report", c.report, "output");
  }
  return c;
}

// Command-line values override the config file.
template <class T>
void overlay(std::optional<T>& dst, const std::optional<T>& src) {
  if (src) dst = src;
}

RunConfig merge(const std::string& experiment, const std::string& config_path, const RunConfig& flags) {
  RunConfig c;
  if (!config_path.empty()) {
    c = load_config(config_path);
    if (c.experiment != experiment)
      throw ConfigError("config is for '" + c.experiment + "', not '" + experiment + "'");
  }
  c.experiment = experiment;
  overlay(c.n, flags.n);
  overlay(c.width, flags.width);
  overlay(c.half, flags.half);
  overlay(c.length, flags.length);
  overlay(c.scheme, flags.scheme);
  overlay(c.seed, flags.seed);
  overlay(c.amplitude, flags.amplitude);
  overlay(c.support, flags.support);
  overlay(c.mode, flags.mode);
  overlay(c.max_steps, flags.max_steps);
  overlay(c.log_every, flags.log_every);
  overlay(c.tolerance, flags.tolerance);
  overlay(c.target_reduction, flags.target_reduction);
  overlay(c.cfl, flags.cfl);
  overlay(c.csv, flags.csv);
  overlay(c.snapshot, flags.snapshot);
  overlay(c.report, flags.report);
  if (!c.seed) throw ConfigError("a perturbation seed is required (--seed or perturbation.seed)");
  auto positive = [](const auto& v, const char* name) {
    if (v && !(*v > 0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(c.n, "grid.n");
  positive(c.half, "grid.half");
  positive(c.length, "grid.length");
  positive(c.max_steps, "flow.max_steps");
  positive(c.cfl, "flow.cfl");
  positive(c.log_every, "flow.log_every");
  if (c.amplitude && *c.amplitude < 0) throw ConfigError("perturbation.amplitude must be non-negative");
  return c;
}

json config_json(const RunConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  auto put = [&](const char* sect, const char* key, const auto& v) {
    if (v) j[sect][key] = *v;
  };
  put("grid", "n", c.n);
  put("grid", "half", c.half);
  put("grid", "length", c.length);
  put("grid", "width", c.width);
  put("grid", "scheme", c.scheme);
  put("perturbation", "seed", c.seed);
  put("perturbation", "amplitude", c.amplitude);
  put("perturbation", "support", c.support);
  put("flow", "mode", c.mode);
  put("flow", "max_steps", c.max_steps);
  put("flow", "tolerance", c.tolerance);
  put("flow", "target_reduction", c.target_reduction);
  put("flow", "cfl", c.cfl);
  put("flow", "log_every", c.log_every);
  return j;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

Scheme parse_scheme(const std::optional<std::string>& s, Scheme fallback) {
  if (!s) return fallback;
  try {
    return scheme_from_string(*s);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

void add_common_flow_flags(CLI::App* sc, RunConfig& f, std::string& config) {
  sc->add_option("--config", config, "JSON run configuration");
  sc->add_option("--grid", f.n, "sites per axis");
  sc->add_option("--seed", f.seed, "perturbation seed (required)");
  sc->add_option("--amp", f.amplitude, "perturbation amplitude");
  sc->add_option("--max-steps", f.max_steps, "step budget");
  sc->add_option("--tol", f.tolerance, "stop once sup|Q - Id| is below this");
  sc->add_option("--scheme", f.scheme, "centered, centered4 or spectral");
  sc->add_option("--csv", f.csv, "time series output");
  sc->add_option("--snapshot", f.snapshot, "final field snapshot");
  sc->add_option("--report", f.report, "JSON summary");
}

int run_triple_flow(const RunConfig& c) {
  const Grid g = periodic_grid(c.n.value_or(12), c.length.value_or(1.0), parse_scheme(c.scheme, Scheme::Centered));
  TripleState s = normalize_periods(make_triple_state(standard_triple_field(g)));
  s.a = band_limited_perturbation(s, c.amplitude.value_or(0.05), *c.seed);
  TripleFlowConfig cfg;
  if (c.max_steps) cfg.max_steps = *c.max_steps;
  if (c.tolerance) cfg.tolerance = *c.tolerance;
  const TripleFlowResult r = run_flow_triples(s, cfg);
  if (c.csv) write_triple_csv(*c.csv, r.rows);
  if (c.snapshot) write_snapshot(*c.snapshot, current_triple(r.state));
  const auto& last = r.rows.back();
  json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = config_json(c);
  j["converged"] = r.converged;
  j["steps"] = last.step;
  j["final"] = {{"t", last.t}, {"F", last.F}, {"vol", last.vol}, {"sup_Q_dev", last.sup_Q_dev},
                {"energy_gap", last.F - 3 * last.vol}};
  if (c.report) write_json(*c.report, j);
  std::cout << j.dump(2) << '\n';
  if (!r.converged) throw ConvergenceFailure("triple flow did not reach sup|Q - Id| < tol within the step budget");
  return 0;
}

int run_connection_flow(const RunConfig& c) {
  const Grid g = chart_grid(c.n.value_or(24), c.half.value_or(4.0), c.width.value_or(2),
                            parse_scheme(c.scheme, Scheme::Centered4));
  ConnState s = make_conn_state(background_round_s4(g));
  s.a = interior_perturbation(s, c.amplitude.value_or(0.02), *c.seed, c.support.value_or(2.0));
  ConnFlowConfig cfg;
  try {
    if (c.mode) cfg.mode = flow_mode_from_string(*c.mode);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (c.max_steps) cfg.max_steps = *c.max_steps;
  if (c.tolerance) cfg.tolerance = *c.tolerance;
  cfg.target_reduction = c.target_reduction.value_or(10.0);
  if (c.cfl) cfg.cfl = *c.cfl;
  if (c.log_every) cfg.log_every = *c.log_every;
  const ConnFlowResult r = run_flow(s, cfg);
  if (c.csv) write_connection_csv(*c.csv, r.rows);
  if (c.snapshot) write_snapshot(*c.snapshot, current_connection(r.state));
  const auto& first = r.rows.front();
  const auto& last = r.rows.back();
  json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = config_json(c);
  j["mode"] = to_string(cfg.mode);
  j["converged"] = r.converged;
  j["lambda_max"] = r.lambda_max;
  j["steps"] = last.step;
  j["initial_sup_Q_dev"] = first.sup_Q_dev;
  j["final"] = {{"t", last.t}, {"E", last.E}, {"sup_Q_dev", last.sup_Q_dev}, {"min_eig_Q", last.min_eig_Q},
                {"bianchi_res", last.bianchi_res}, {"sign_flips", last.sign_flips},
                {"energy_gap", last.E - 3 * last.interior_volume}};
  if (c.report) write_json(*c.report, j);
  std::cout << j.dump(2) << '\n';
  const bool has_target = cfg.tolerance > 0 || cfg.target_reduction > 0;
  if (has_target && !r.converged) throw ConvergenceFailure("connection flow did not reach its target within the step budget");
  return 0;
}

// One line per check, tied to the invariant it exercises.
struct Verifier {
  int failed = 0;
  json rows = json::array();

  void check(const std::string& module, const std::string& name, bool pass, const std::string& measured,
             const std::string& invariant) {
    if (!pass) ++failed;
    std::cout << (pass ? "PASS " : "FAIL ") << module << ": " << name << " [" << measured << "]  invariant: " << invariant
              << '\n';
    rows.push_back({{"module", module}, {"check", name}, {"pass", pass}, {"measured", measured}, {"invariant", invariant}});
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

int run_verify(std::uint64_t seed, const std::optional<std::string>& report) {
  namespace ck = defcon::checks;
  Verifier v;

  {
    std::mt19937_64 rng(seed);
    double worst_sd = 0, worst_vol = 0;
    for (int k = 0; k < 200; ++k) {
      const Frame3<double> F = ck::random_definite_frame(rng);
      const double vol = std::abs(mu_of<double>(F));
      const Metric4<double> m = reconstruct_metric<double>(F, vol);
      for (int i = 0; i < 3; ++i) {
        const Form2<double> f = F.col(i);
        const Form2<double> sf = hodge_star<2>(m, f);
        worst_sd = std::max(worst_sd, std::min((sf - f).norm(), (sf + f).norm()) / f.norm());
      }
      worst_vol = std::max(worst_vol, std::abs(std::sqrt(m.g.determinant()) / (vol / 2) - 1));
    }
    v.check("exterior4", "reconstructed metric makes the frame (anti-)self-dual", worst_sd < 1e-9, fmt(worst_sd),
            "Urbantke reconstruction: the span of a definite frame is Lambda^+ of a unique conformal class");
    v.check("exterior4", "reconstructed volume is mu / 2", worst_vol < 1e-10, fmt(worst_vol),
            "volume normalisation mu = 2 dvol_g");
  }
  {
    const Grid g = periodic_grid(6, 1.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    Field a = zeros(g, 1, 3), b = zeros(g, 2, 3);
    for (auto* f : {&a, &b})
      for (long i = 0; i < f->data.size(); ++i) f->data[i] = n(rng);
    const double dd = max_abs(d_discrete(d_discrete(a)));
    v.check("lattice", "d d = 0 on the torus", dd < 1e-10, fmt(dd), "d_discrete squares to zero on periodic grids");
    const MetricField m = triple_metric(normalize_periods(make_triple_state(standard_triple_field(g))));
    const double lhs = l2_inner(d_discrete(a), b, m), rhs = l2_inner(a, codifferential(b, m), m);
    const double adj = std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300);
    v.check("lattice", "codifferential is the mass adjoint of d", adj < 1e-10, fmt(adj),
            "<d a, b>_g = <a, d* b>_g");
    Field c = zeros(g, 3, 1);
    for (long i = 0; i < c.data.size(); ++i) c.data[i] = n(rng);
    const double stokes = std::abs(integrate(d_discrete(c)));
    v.check("lattice", "discrete Stokes", stokes < 1e-12, fmt(stokes), "integral of d of a 3-form vanishes on the torus");
  }
  {
    const ck::IndexSuite s = ck::index_suite(1000, seed);
    v.check("topology", "index(2,0) = -10 and index(3,-1) = -8", s.index_2_0 == -10 && s.index_3_m1 == -8,
            std::to_string(s.index_2_0) + ", " + std::to_string(s.index_3_m1), "index = -5 chi - 7 tau");
    v.check("topology", "character pipeline equals -5 chi - 7 tau", s.formula_mismatches == 0,
            std::to_string(s.formula_mismatches) + " mismatches / " + std::to_string(s.pairs),
            "index from A-hat ch(S^3_+) agrees with the closed form");
    const ck::SpinSuite sp = ck::spin_suite();
    v.check("topology", "spin representation identities", sp.items == 6 && sp.holding == 6,
            std::to_string(sp.holding) + "/" + std::to_string(sp.items), "character identities of SU(2) x SU(2)");
  }
  {
    const ck::PointwiseSuite p = ck::pointwise_suite(200, seed);
    v.check("symbols", "4d identity", p.lemma < 1e-12, fmt(p.lemma), "(a ^ i_u b1, b2) + (a ^ i_u b2, b1) = (b1, b2) a(u)");
    v.check("symbols", "L and L* adjoint", p.adjointness < 1e-12, fmt(p.adjointness), "L* is the adjoint of L");
    v.check("symbols", "tr Q = 3", p.trace_q < 1e-12, fmt(p.trace_q), "trace normalisation of Q");
    v.check("symbols", "delta Q trace free", p.delta_q_trace < 1e-12, fmt(p.delta_q_trace), "tr dQ = 0");
    v.check("symbols", "L(a ^ i_u F) proportional to a(u) Q", p.corollary_half < 1e-12,
            "factor " + fmt(p.corollary_ratio) + ", residual " + fmt(p.corollary_half),
            "sigma o S = 0 needs L(a ^ i_u F) proportional to Q");
    const ck::ExactSuite e = ck::exact_suite(50, seed);
    v.check("symbols", "exact sequence", e.certified == e.draws, std::to_string(e.certified) + "/" + std::to_string(e.draws),
            "0 -> TX + E -> L1 (x) E -> S2_0 E -> 0 exact");
    const ck::ParabolicSuite ps = ck::parabolic_suite(50, 10, seed);
    v.check("symbols", "parabolic symbol negative", ps.max_eigenvalue < 0 && ps.max_real_eigenvalue < 0,
            fmt(ps.max_eigenvalue), "adjusted flow is parabolic");
    v.check("symbols", "quadratic lower bound", ps.min_bound_ratio >= 1 - std::sqrt(3.0) / 2, fmt(ps.min_bound_ratio),
            "-(Sigma b, b) >= (1 - sqrt 3 / 2)(|S* b|^2 + |w* b|^2) at perfect data");
  }
  {
    const ck::LinearisationSuite l = ck::linearisation_suite(20, 6, seed);
    v.check("symbols", "delta Q and delta B match finite differences",
            l.delta_q < 1e-6 && l.delta_b_compact < 1e-6 && l.delta_b_expanded < 1e-6,
            fmt(std::max({l.delta_q, l.delta_b_compact, l.delta_b_expanded})), "linearisations of Q and B");
    v.check("triple_lab", "flow rhs is the energy gradient", l.triple_gradient < 1e-4, fmt(l.triple_gradient),
            "<rhs, b> = -(1/4) dF[b]");
    v.check("connection_lab", "plain rhs is the energy gradient", l.connection_gradient < 1e-4,
            fmt(l.connection_gradient), "<rhs, b> = -dE[b]");
  }
  {
    const ck::TripleRun t = ck::triple_run(6, 0.05, seed, 2000);
    v.check("triple_lab", "small torus flow converges monotonically",
            t.converged && t.monotone && t.final_dev < 1e-6 && t.final_gap < 1e-6,
            "dev " + fmt(t.final_dev) + ", gap " + fmt(t.final_gap), "F decreases to 3 vol at Q = Id");
  }
  {
    const ck::BackgroundFloor b = ck::background_floor({12, 24}, 4.0);
    v.check("connection_lab", "round background Q = Id under refinement", b.sup_dev[1] < b.sup_dev[0] / 4,
            fmt(b.sup_dev[0]) + " -> " + fmt(b.sup_dev[1]), "the round S4 connection is perfect");
    const ck::GSuite gs = ck::g_suite(10, 2.0, 5, 10, seed);
    v.check("connection_lab", "G_A symmetric and positive", gs.max_asymmetry < 1e-8 && gs.positive == gs.samples,
            "asym " + fmt(gs.max_asymmetry) + ", min Rayleigh " + fmt(gs.min_rayleigh),
            "G_A is self-adjoint and positive on compactly supported fields");
    const ck::OrderSuite o = ck::order_suite({10, 20}, 1.0);
    v.check("connection_lab", "Bianchi residual second order", o.bianchi_ratio[0] > 3.6 && o.bianchi_ratio[0] < 4.4,
            "ratio " + fmt(o.bianchi_ratio[0]), "d_A F_A = 0");
    v.check("connection_lab", "torsion residual second order", o.torsion_ratio[0] > 3.6 && o.torsion_ratio[0] < 4.4,
            "ratio " + fmt(o.torsion_ratio[0]), "d_A theta = 0 for the Levi-Civita connection on Lambda^+");
  }
  {
    const ck::MomentSuite m = ck::moment_suite(seed);
    v.check("moment_map", "perfect state has vanishing moments", m.perfect_max_moment < 1e-8 && m.perfect_max_variance < 1e-10,
            fmt(m.perfect_max_moment), "moment map vanishes exactly on perfect connections");
    v.check("moment_map", "degree-2 moment linear in s", m.r2 > 0.999, "R^2 " + fmt(m.r2), "h(F)^2 = Q(q,q) mu");
    v.check("moment_map", "isotropy pairing vanishes", m.max_isotropy < 1e-10, fmt(m.max_isotropy),
            "the gauge orbit is isotropic");
  }
  std::cout << (v.failed == 0 ? "all checks passed" : std::to_string(v.failed) + " checks failed") << '\n';
  if (report) write_json(*report, {{"schema_version", kSchemaVersion}, {"seed", seed}, {"checks", v.rows}});
  return v.failed == 0 ? 0 : 1;
}

int run_moment(int n, double half, double amp, const std::optional<std::uint64_t>& seed, int degree, int max_l,
               const std::optional<std::string>& report) {
  if (amp > 0 && !seed) throw ConfigError("a perturbation seed is required when --amp > 0");
  const Grid g = chart_grid(n, half, 2);
  ConnState s = make_conn_state(background_round_s4(g));
  if (amp > 0) s.a = interior_perturbation(s, amp, *seed);
  const Field F = curvature(current_connection(s));
  const SphereQuadrature quad = sphere_quadrature(degree);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["grid"] = {{"n", n}, {"half", half}};
  j["perturbation"] = {{"amplitude", amp}};
  if (seed) j["perturbation"]["seed"] = *seed;
  j["quadrature"] = {{"degree", quad.degree}, {"nodes", quad.nodes.size()}};
  try {
    const PerfectReport r = perfect_check(F, quad, max_l);
    j["max_fibre_variance"] = r.max_variance;
    j["max_moment"] = r.max_moment;
    j["detector_constant"] = r.detector_constant;
    json m = json::array();
    for (size_t k = 0; k < r.moments.size(); ++k) m.push_back({{"l", r.l[k]}, {"m", r.m[k]}, {"value", r.moments[k]}});
    j["moments"] = m;
  } catch (const Error& e) {
    throw EscapedError(std::string("moment report needs a definite state: ") + e.what());
  }
  if (report) write_json(*report, j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return int(k);
    return -1;
  }
};

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  Csv c;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + " is empty");
  std::stringstream hs(line);
  for (std::string f; std::getline(hs, f, ',');) c.header.push_back(f);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) {
      try {
        size_t used = 0;
        row.push_back(std::stod(f, &used));
        if (used != f.size()) throw std::invalid_argument(f);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number: '" + f + "'");
      }
    }
    if (row.size() != c.header.size()) throw ConfigError(path + ":" + std::to_string(lineno) + ": wrong number of fields");
    c.rows.push_back(std::move(row));
  }
  if (c.rows.empty()) throw ConfigError(path + " has no data rows");
  return c;
}

int run_report(const std::string& path, bool as_json) {
  const Csv c = read_csv(path);
  const int iF = c.column("F"), iE = c.column("E"), it = c.column("t"), idev = c.column("sup_Q_dev");
  const int ivol = iF >= 0 ? c.column("vol") : c.column("interior_volume");
  const int ien = iF >= 0 ? iF : iE;
  if (ien < 0 || it < 0 || idev < 0 || ivol < 0) throw ConfigError(path + " is not a flow time series");
  bool monotone = true;
  for (size_t k = 1; k < c.rows.size(); ++k)
    if (!(c.rows[k][ien] <= c.rows[k - 1][ien])) monotone = false;
  // Log-linear least squares of sup|Q - Id| against t.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& r : c.rows)
    if (r[idev] > 0) {
      const double x = r[it], y = std::log(r[idev]);
      sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
    }
  const double denom = n * sxx - sx * sx;
  const std::optional<double> rate = n >= 2 && denom > 0 ? std::optional<double>(-(n * sxy - sx * sy) / denom) : std::nullopt;
  const auto& last = c.rows.back();
  const double gap = last[ien] - 3 * last[ivol];
  const std::string energy = iF >= 0 ? "F" : "E";
  if (as_json) {
    json j{{"schema_version", kSchemaVersion}, {"file", path}, {"energy", energy}, {"rows", c.rows.size()},
           {"monotone", monotone}, {"energy_gap", gap}, {"final_sup_Q_dev", last[idev]}};
    j["decay_rate"] = rate ? json(*rate) : json(nullptr);
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "monotonicity of " << energy << ": " << (monotone ? "PASS" : "FAIL") << '\n';
    if (rate) std::cout << "decay rate of sup|Q - Id| (log-linear fit): " << *rate << '\n';
    else std::cout << "decay rate of sup|Q - Id|: not enough data\n";
    std::cout << "energy gap " << energy << " - 3 vol: " << gap << '\n';
  }
  return monotone ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Definite connections and triples: flows and checks"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap on worker threads")->check(CLI::PositiveNumber);

  RunConfig tf, cf;
  std::string tconfig, cconfig;
  auto* triple = app.add_subcommand("triple-flow", "gradient flow of definite triples on the 4-torus");
  add_common_flow_flags(triple, tf, tconfig);
  triple->add_option("--length", tf.length, "torus side");

  auto* conn = app.add_subcommand("connection-flow", "flows of definite connections on the S4 chart");
  add_common_flow_flags(conn, cf, cconfig);
  conn->add_option("--half", cf.half, "chart half-width");
  conn->add_option("--width", cf.width, "frozen layer width");
  conn->add_option("--support", cf.support, "perturbation radius");
  conn->add_option("--mode", cf.mode, "plain, adjusted or stabilized");
  conn->add_option("--target-reduction", cf.target_reduction, "stop once sup|Q - Id| fell by this factor");
  conn->add_option("--cfl", cf.cfl, "explicit step as a fraction of 1 / lambda_max");
  conn->add_option("--log-every", cf.log_every, "rows per logged step");

  std::uint64_t vseed = 1;
  std::optional<std::string> vreport;
  auto* verify = app.add_subcommand("verify", "property suite over all modules");
  verify->add_option("--seed", vseed, "seed for random draws")->capture_default_str();
  verify->add_option("--report", vreport, "JSON report");

  long chi = 0, tau = 0;
  bool ijson = false;
  auto* idx = app.add_subcommand("index", "index of the gauge-fixed deformation operator");
  idx->add_option("--chi", chi, "Euler characteristic")->required();
  idx->add_option("--tau", tau, "signature")->required();
  idx->add_flag("--json", ijson, "full report");

  int mn = 16, mdeg = 8, ml = 4;
  double mhalf = 4.0, mamp = 0;
  std::optional<std::uint64_t> mseed;
  std::optional<std::string> mreport;
  auto* moment = app.add_subcommand("moment", "moment-map report for the S4 chart state");
  moment->add_option("--grid", mn, "sites per axis")->capture_default_str();
  moment->add_option("--half", mhalf, "chart half-width")->capture_default_str();
  moment->add_option("--amp", mamp, "perturbation amplitude")->capture_default_str();
  moment->add_option("--seed", mseed, "perturbation seed (required with --amp)");
  moment->add_option("--degree", mdeg, "sphere quadrature degree")->capture_default_str();
  moment->add_option("--max-l", ml, "largest harmonic degree")->capture_default_str();
  moment->add_option("--report", mreport, "JSON report");

  std::string rpath;
  bool rjson = false;
  auto* report = app.add_subcommand("report", "summarise a flow time series");
  report->add_option("csv", rpath, "CSV from triple-flow or connection-flow")->required();
  report->add_flag("--json", rjson, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*triple) return run_triple_flow(merge("triple-flow", tconfig, tf));
    if (*conn) return run_connection_flow(merge("connection-flow", cconfig, cf));
    if (*verify) return run_verify(vseed, vreport);
    if (*idx) {
      const TopoData d{chi, tau};
      const P1Report p = p1_and_bounds(d);
      if (ijson) {
        std::cout << json{{"schema_version", kSchemaVersion}, {"chi", chi}, {"tau", tau}, {"index", index(d)},
                          {"index_via_characters", index_via_characters(d)}, {"p1", p.p1},
                          {"energy_bound_pi2", p.energy_bound_pi2}, {"definite_feasible", p.definite_feasible},
                          {"hitchin_thorpe", p.hitchin_thorpe}}
                         .dump(2)
                  << '\n';
      } else {
        std::printf("%-22s %ld\n", "index", index(d));
        std::printf("%-22s %ld\n", "index via characters", index_via_characters(d));
        std::printf("%-22s %ld\n", "p1", p.p1);
        std::printf("%-22s %ld pi^2\n", "energy bound", p.energy_bound_pi2);
        std::printf("%-22s %s\n", "definite feasible", p.definite_feasible ? "yes" : "no");
        std::printf("%-22s %s\n", "Hitchin-Thorpe", p.hitchin_thorpe ? "yes" : "no");
      }
      return 0;
    }
    if (*moment) return run_moment(mn, mhalf, mamp, mseed, mdeg, ml, mreport);
    if (*report) return run_report(rpath, rjson);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const EscapedError& e) {
    std::cerr << "escaped the definite locus: " << e.what();
    if (!e.sites.empty()) std::cerr << " (first site " << e.sites.front() << ")";
    std::cerr << '\n';
    return 3;
  } catch (const StepError& e) {
    std::cerr << "step failure: " << e.what() << '\n';
    return 3;
  } catch (const ConvergenceFailure& e) {
    std::cerr << "not converged: " << e.what() << '\n';
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
