#include "defcon/symbols.hpp"

#include <cmath>

namespace defcon {

namespace {

const double r2 = std::sqrt(2.0);

Form2<double> fibre2(const Vec& T, int i) { return T.segment<6>(6 * i); }
Form1<double> fibre1(const Vec& a, int i) { return a.segment<4>(4 * i); }

Mat blockdiag(const Mat& b, int n) {
  Mat m = Mat::Zero(b.rows() * n, b.cols() * n);
  for (int i = 0; i < n; ++i) m.block(i * b.rows(), i * b.cols(), b.rows(), b.cols()) = b;
  return m;
}

Mat sym_sqrt(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

template <class Fn>
Mat columns(int rows, int cols, Fn fn) {
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j) m.col(j) = fn(Vec::Unit(cols, j));
  return m;
}

}  // namespace

SymbolData make_symbol_data(const Frame3<double>& F) {
  SymbolData d;
  d.F = F;
  const Mat3 G = gram_matrix(F);
  d.mu = G.trace() / 3;
  if (!is_definite<double>(G, 1) && !is_definite<double>(G, -1))
    throw NotDefiniteError("curvature frame is not definite");
  d.Q = G / d.mu;
  d.g = reconstruct_metric<double>(F, std::abs(d.mu));
  return d;
}

int dim(Space s) {
  switch (s) {
    case Space::L1E: return 12;
    case Space::TXE: return 7;
    case Space::TX: return 4;
    case Space::E: return 3;
    case Space::L2E: return 18;
    case Space::S2E: return 6;
    default: return 5;
  }
}

Mat gram(const SymbolData& d, Space s) {
  switch (s) {
    case Space::L1E: return blockdiag(d.g.g.inverse(), 3);
    case Space::TX: return d.g.g;
    case Space::E: return Mat::Identity(3, 3);
    case Space::TXE: {
      Mat m = Mat::Identity(7, 7);
      m.topLeftCorner(4, 4) = d.g.g;
      return m;
    }
    case Space::L2E: return blockdiag(form_metric<2>(d.g), 3);
    default: return Mat::Identity(dim(s), dim(s));
  }
}

Mat adjoint(const SymbolData& d, const Mat& A, Space dom, Space cod) {
  return gram(d, dom).ldlt().solve(A.transpose() * gram(d, cod));
}

Eigen::Matrix<double, 6, 1> sym_to_vec(const Mat3& M) {
  Eigen::Matrix<double, 6, 1> v;
  v << M(0, 0), M(1, 1), M(2, 2), r2 * M(0, 1), r2 * M(0, 2), r2 * M(1, 2);
  return v;
}

Mat3 vec_to_sym(const Eigen::Matrix<double, 6, 1>& v) {
  Mat3 M;
  M << v(0), v(3) / r2, v(4) / r2, v(3) / r2, v(1), v(5) / r2, v(4) / r2, v(5) / r2, v(2);
  return M;
}

const Eigen::Matrix<double, 6, 5>& trace_free_basis() {
  static const Eigen::Matrix<double, 6, 5> B = [] {
    Eigen::Matrix<double, 6, 5> b = Eigen::Matrix<double, 6, 5>::Zero();
    b(0, 0) = 1 / r2; b(1, 0) = -1 / r2;
    b(0, 1) = 1 / std::sqrt(6.0); b(1, 1) = 1 / std::sqrt(6.0); b(2, 1) = -2 / std::sqrt(6.0);
    b(3, 2) = 1; b(4, 3) = 1; b(5, 4) = 1;
    return b;
  }();
  return B;
}

double pair_FT(const SymbolData& d, const Vec& T) {
  double s = 0;
  for (int i = 0; i < 3; ++i) s += wedge_pair<double>(d.F.col(i), fibre2(T, i));
  return s / d.mu;
}

Mat3 L_apply(const SymbolData& d, const Vec& T) {
  Mat3 M;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      M(i, j) = (wedge_pair<double>(fibre2(T, i), d.F.col(j)) + wedge_pair<double>(fibre2(T, j), d.F.col(i))) /
                (2 * d.mu);
  return M;
}

Vec L_star_apply(const SymbolData& d, const Mat3& M) {
  Vec T(18);
  for (int i = 0; i < 3; ++i) T.segment<6>(6 * i) = d.F * M.row(i).transpose();
  return T;
}

Mat3 delta_Q(const SymbolData& d, const Vec& T) {
  return 2 * L_apply(d, T) - (2.0 / 3.0) * pair_FT(d, T) * d.Q;
}

Mat3 Pi_apply(const SymbolData& d, const Mat3& M) {
  return M - ((d.Q * M).trace() / (d.Q * d.Q).trace()) * d.Q;
}

Mat3 Theta_apply(const SymbolData& d, const Mat3& M) {
  return 8 * M + (8.0 / 9.0) * (d.Q * d.Q).trace() * M.trace() * Mat3::Identity();
}

Mat3 delta_B_compact(const SymbolData& d, const Vec& T) {
  return Pi_apply(d, Theta_apply(d, Pi_apply(d, L_apply(d, T))));
}

Mat3 delta_B_expanded(const SymbolData& d, const Vec& T) {
  const Mat3 L = L_apply(d, T);
  const double s = pair_FT(d, T), q2 = (d.Q * d.Q).trace();
  return 8 * L - (8.0 / 3.0) * s * d.Q - (8.0 / 3.0) * (d.Q * L).trace() * Mat3::Identity() +
         (8.0 / 9.0) * s * q2 * Mat3::Identity();
}

Mat L_matrix(const SymbolData& d) {
  return columns(6, 18, [&](const Vec& e) { return Vec(sym_to_vec(L_apply(d, e))); });
}

Mat Lstar_matrix(const SymbolData& d) {
  return columns(18, 6, [&](const Vec& e) { return L_star_apply(d, vec_to_sym(e)); });
}

Mat Pi_matrix(const SymbolData& d) {
  return columns(6, 6, [&](const Vec& e) { return Vec(sym_to_vec(Pi_apply(d, vec_to_sym(e)))); });
}

Mat Theta_matrix(const SymbolData& d) {
  return columns(6, 6, [&](const Vec& e) { return Vec(sym_to_vec(Theta_apply(d, vec_to_sym(e)))); });
}

Mat P_matrix(const SymbolData& d) { return sym_sqrt(Theta_matrix(d)) * Pi_matrix(d) * L_matrix(d); }

Mat S_matrix(const SymbolData& d) {
  return columns(12, 4, [&](const Vec& u) {
    Vec a(12);
    for (int i = 0; i < 3; ++i) a.segment<4>(4 * i) = interior<2>(Vec4<double>(u), Form2<double>(d.F.col(i)));
    return a;
  });
}

Mat w1_matrix(const Form1<double>& alpha) {
  Mat m = Mat::Zero(12, 3);
  for (int i = 0; i < 3; ++i) m.block<4, 1>(4 * i, i) = alpha;
  return m;
}

Mat w2_matrix(const Form1<double>& alpha) {
  return columns(18, 12, [&](const Vec& a) {
    Vec T(18);
    for (int i = 0; i < 3; ++i) T.segment<6>(6 * i) = wedge<1, 1>(alpha, fibre1(a, i));
    return T;
  });
}

Mat wedge_alpha_matrix(const Form1<double>& alpha) { return w2_matrix(alpha); }

Mat sigma_alpha(const SymbolData& d, const Form1<double>& alpha) {
  if (alpha.norm() == 0) throw ZeroCovectorError("symbol at zero covector");
  const Mat W = w2_matrix(alpha);
  return columns(5, 12, [&](const Vec& a) {
    const Mat3 L = L_apply(d, W * a);
    const Mat3 s = 2 * L - (2.0 / 3.0) * L.trace() * d.Q;
    return Vec(trace_free_basis().transpose() * sym_to_vec(s));
  });
}

Mat H_alpha(const SymbolData& d, const Form1<double>& alpha) { return P_matrix(d) * w2_matrix(alpha); }

int numerical_rank(const Mat& A, double rel_tol) {
  Eigen::JacobiSVD<Mat> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0) return 0;
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

double max_principal_angle(const Mat& A, const Mat& B) {
  const Mat qa = Eigen::HouseholderQR<Mat>(A).householderQ() * Mat::Identity(A.rows(), A.cols());
  const Mat qb = Eigen::HouseholderQR<Mat>(B).householderQ() * Mat::Identity(B.rows(), B.cols());
  // sin of the largest angle, accurate for small angles.
  const Mat r = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<Mat> svd(r);
  return std::asin(std::min(1.0, svd.singularValues()(0)));
}

ExactSequenceReport exact_sequence_check(const SymbolData& d, const Form1<double>& alpha) {
  if (alpha.norm() == 0) throw ZeroCovectorError("symbol at zero covector");
  ExactSequenceReport r;
  const Mat sig = sigma_alpha(d, alpha);
  Mat inj(12, 7);
  inj << S_matrix(d), w1_matrix(alpha);
  r.rank_injection = numerical_rank(inj);
  r.rank_sigma = numerical_rank(sig);
  const double scale = sig.norm();
  r.sigma_w_residual = (sig * w1_matrix(alpha)).norm() / (scale * alpha.norm());
  r.sigma_S_residual = (sig * S_matrix(d)).norm() / (scale * S_matrix(d).norm());
  // Compare subspaces in coordinates orthonormal for the L1E product.
  const Mat G12 = sym_sqrt(gram(d, Space::L1E));
  Eigen::JacobiSVD<Mat> svd(sig, Eigen::ComputeFullV);
  const Mat ker = svd.matrixV().rightCols(12 - r.rank_sigma);
  if (ker.cols() == inj.cols()) {
    r.max_principal_angle = max_principal_angle(G12 * ker, G12 * inj);
  } else {
    r.max_principal_angle = M_PI / 2;
  }
  r.exact = r.rank_injection == 7 && r.rank_sigma == 5 && r.max_principal_angle < 1e-8;
  return r;
}

ParabolicSymbol parabolic_symbol(const SymbolData& d, const Form1<double>& alpha) {
  if (alpha.norm() == 0) throw ZeroCovectorError("symbol at zero covector");
  const Mat H = H_alpha(d, alpha);
  const Mat Hs = adjoint(d, H, Space::L1E, Space::S2E);
  const Mat S = S_matrix(d);
  const Mat Ss = adjoint(d, S, Space::TX, Space::L1E);
  const Mat w2 = w2_matrix(alpha), w2s = adjoint(d, w2, Space::L1E, Space::L2E);
  const Mat w1 = w1_matrix(alpha), w1s = adjoint(d, w1, Space::E, Space::L1E);
  ParabolicSymbol p;
  p.sigma = -(Hs * H + S * Ss * w2s * w2 + w1 * w1s);
  const Mat G = gram(d, Space::L1E);
  const Mat Gs = G * p.sigma;
  p.asymmetry = (Gs - Gs.transpose()).norm() / Gs.norm();
  const Mat G12 = sym_sqrt(G), G12i = G12.inverse();
  const Mat sym = G12 * p.sigma * G12i;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sym + sym.transpose()));
  p.eigenvalues = es.eigenvalues();
  Eigen::EigenSolver<Mat> ge(p.sigma, false);
  p.max_real_eigenvalue = ge.eigenvalues().real().maxCoeff();
  return p;
}

double uniqueness_symbol(const SymbolData& d, const Form1<double>& alpha, const Eigen::Vector3d& phi,
                         const Vec4<double>& u) {
  const double a2 = alpha.dot(d.g.g.inverse() * alpha);
  const Vec Su = S_matrix(d) * u;
  return -a2 * (phi.squaredNorm() + Su.dot(gram(d, Space::L1E) * Su));
}

}  // namespace defcon
