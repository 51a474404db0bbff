#pragma once

#include <random>

#include "defcon/exterior4.hpp"

namespace testutil {

using namespace defcon;

inline std::mt19937_64& rng() {
  static std::mt19937_64 r(20240611);
  return r;
}

inline double gauss() {
  static std::normal_distribution<double> n(0.0, 1.0);
  return n(rng());
}

template <class M>
M random_matrix() {
  M m;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = gauss();
  return m;
}

// Pull back a 2-form by the linear map x -> L^{-1} x.
inline Form2<double> push_forward(const Mat4<double>& L, const Form2<double>& w) {
  const Mat4<double> Li = L.inverse();
  return from_matrix<double>(Li.transpose() * as_matrix<double>(w) * Li);
}

inline Frame3<double> push_forward(const Mat4<double>& L, const Frame3<double>& f) {
  Frame3<double> r;
  for (int i = 0; i < 3; ++i) r.col(i) = push_forward(L, Form2<double>(f.col(i)));
  return r;
}

inline Mat4<double> random_gl4_positive() {
  for (;;) {
    Mat4<double> L = Mat4<double>::Identity() + 0.5 * random_matrix<Mat4<double>>();
    if (L.determinant() > 0.2) return L;
  }
}

// Generic definite frame: a random GL(4) image of a mixed standard triple.
inline Frame3<double> random_definite_frame() {
  const Frame3<double> s = standard_triple<double>();
  Eigen::Matrix3d M = Eigen::Matrix3d::Identity() + 0.3 * random_matrix<Eigen::Matrix3d>();
  while (std::abs(M.determinant()) < 0.2) M = Eigen::Matrix3d::Identity() + 0.3 * random_matrix<Eigen::Matrix3d>();
  return push_forward(random_gl4_positive(), Frame3<double>(s * M));
}

inline Form1<double> random_form1() { return random_matrix<Form1<double>>(); }
inline Form2<double> random_form2() { return random_matrix<Form2<double>>(); }
inline Vec4<double> random_vec4() { return random_matrix<Vec4<double>>(); }

}  // namespace testutil
