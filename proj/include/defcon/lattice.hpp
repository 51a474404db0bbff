#pragma once
// Collocated discrete exterior calculus on structured 4D grids.
//
// Sites are stored row-major with axis 3 fastest. A field of degree p and
// fibre rank k stores, per site, k consecutive blocks of C(4,p) coefficients.

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "defcon/exterior4.hpp"

namespace defcon {

enum class Topology { Periodic, ChartFrozenBoundary };
enum class Scheme { Centered, Centered4, Spectral };

std::string to_string(Topology t);
std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct Grid {
  std::array<int, 4> shape{4, 4, 4, 4};
  std::array<double, 4> spacing{1, 1, 1, 1};
  std::array<double, 4> origin{0, 0, 0, 0};  // coordinate of site 0
  Topology topology = Topology::Periodic;
  int width = 0;                             // frozen layer, chart only
  Scheme scheme = Scheme::Centered;

  void validate() const;
  long sites() const { return long(shape[0]) * shape[1] * shape[2] * shape[3]; }
  long stride(int axis) const;
  long index(const std::array<int, 4>& c) const;
  std::array<int, 4> coords(long s) const;
  Vec4<double> position(long s) const;
  double cell_volume() const { return spacing[0] * spacing[1] * spacing[2] * spacing[3]; }
  bool frozen(long s) const;
  int stencil_radius() const;
  bool operator==(const Grid&) const = default;
};

// n^4 sites of a torus of side `length`.
Grid periodic_grid(int n, double length = 1.0, Scheme scheme = Scheme::Centered);
// Cell-centred chart on [-half, half]^4 with a frozen layer of `width` sites.
Grid chart_grid(int n, double half = 4.0, int width = 2, Scheme scheme = Scheme::Centered4);

struct Field {
  Grid grid;
  int degree = 0;
  int fibre = 1;
  Eigen::VectorXd data;

  int comps() const { return binom4(degree); }
  int block() const { return fibre * comps(); }
  double* at(long s) { return data.data() + s * block(); }
  const double* at(long s) const { return data.data() + s * block(); }
  double& operator()(long s, int f, int c) { return data[s * block() + f * comps() + c]; }
  double operator()(long s, int f, int c) const { return data[s * block() + f * comps() + c]; }
};

Field zeros(const Grid& g, int degree, int fibre = 1);
Field sample(const Grid& g, int degree, int fibre,
             const std::function<void(const Vec4<double>&, double*)>& f);

// Per-site symmetric positive definite metric.
struct MetricField {
  Grid grid;
  Eigen::VectorXd data;  // 16 per site

  Eigen::Map<const Mat4<double>> at(long s) const { return Eigen::Map<const Mat4<double>>(data.data() + 16 * s); }
  Eigen::Map<Mat4<double>> at(long s) { return Eigen::Map<Mat4<double>>(data.data() + 16 * s); }
};

MetricField euclidean_metric(const Grid& g);

// One-dimensional derivative along an axis, as sparse rows.
struct AxisOperator {
  int n = 0;
  std::vector<std::vector<std::pair<int, double>>> rows, cols;  // D and D^T
};

AxisOperator axis_operator(const Grid& g, int axis);

// out += D_axis(in) (or D_axis^T) for fields with `block` doubles per site.
void apply_axis(const Grid& g, const AxisOperator& op, int axis, const double* in, double* out, int block,
                bool transpose = false);

Field d_discrete(const Field& f);
// Plain l2 transpose of d_discrete (no metric, no cell weight).
Field d_transpose(const Field& f);

// Mass-matrix application: per site  w * sqrt(det g) * H_p(g) (x) Id_fibre.
Field apply_mass(const Field& f, const MetricField& g, bool inverse = false);
double l2_inner(const Field& a, const Field& b, const MetricField& g);
Field codifferential(const Field& f, const MetricField& g);

double integrate(const Field& f);

void axpy(double a, const Field& x, Field& y);
double max_abs(const Field& f);

// Snapshot: one JSON header line, then little-endian float64 data.
void write_snapshot(const std::string& path, const Field& f, const std::string& convention = "std-l2");
Field read_snapshot(const std::string& path);

}  // namespace defcon
