#pragma once
// Pointwise linear analysis at a single point with definite curvature data.
//
// Coordinates of the concrete spaces (E = R^3 with the Euclidean product):
//   L1E  (12)  a_i = fibre i 1-form, index 4*i + mu, product sum_i a_i^T g^{-1} b_i
//   TXE  (7)   (u, phi), product u^T g u + phi.phi
//   L2E  (18)  T_i = fibre i 2-form, index 6*i + c, product sum_i <S_i, T_i>_g
//   S2E  (6)   (M00, M11, M22, r2 M01, r2 M02, r2 M12), Frobenius-orthonormal
//   S20E (5)   orthonormal trace-free coordinates inside S2E
// L and L* are adjoint for the half-scaled pairing (S,T) = 1/2 sum_i <S_i,T_i>_g,
// under which Q_ij = (F_i, F_j) when mu = (1/3) sum F_i ^ F_i. The full product
// on L2E is the one used by the lattice codifferential, so w*w is the orthogonal
// projection onto alpha-perp for unit alpha.

#include <Eigen/Dense>

#include "defcon/exterior4.hpp"

namespace defcon {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;

struct SymbolData {
  Frame3<double> F;
  Mat3 Q;
  Metric4<double> g;
  double mu = 0;
};

// Throws NotDefiniteError unless F spans a definite 3-plane.
SymbolData make_symbol_data(const Frame3<double>& F);

enum class Space { L1E, TXE, TX, E, L2E, S2E, S20E };
int dim(Space s);
Mat gram(const SymbolData& d, Space s);
// Adjoint of A : dom -> cod for the products above.
Mat adjoint(const SymbolData& d, const Mat& A, Space dom, Space cod);

Eigen::Matrix<double, 6, 1> sym_to_vec(const Mat3& M);
Mat3 vec_to_sym(const Eigen::Matrix<double, 6, 1>& v);
// 6x5, orthonormal columns spanning trace-free matrices.
const Eigen::Matrix<double, 6, 5>& trace_free_basis();

// Pairing (F, T) = sum_i (F_i, T_i).
double pair_FT(const SymbolData& d, const Vec& T);

Mat3 L_apply(const SymbolData& d, const Vec& T);
Vec L_star_apply(const SymbolData& d, const Mat3& M);
Mat3 delta_Q(const SymbolData& d, const Vec& T);
Mat3 Pi_apply(const SymbolData& d, const Mat3& M);
Mat3 Theta_apply(const SymbolData& d, const Mat3& M);
Mat3 delta_B_compact(const SymbolData& d, const Vec& T);
Mat3 delta_B_expanded(const SymbolData& d, const Vec& T);

// Matrices in the coordinates above.
Mat L_matrix(const SymbolData& d);        // L2E -> S2E
Mat Lstar_matrix(const SymbolData& d);    // S2E -> L2E
Mat Pi_matrix(const SymbolData& d);       // S2E -> S2E
Mat Theta_matrix(const SymbolData& d);    // S2E -> S2E
Mat P_matrix(const SymbolData& d);        // L2E -> S2E, Theta^{1/2} Pi L
Mat S_matrix(const SymbolData& d);        // TX -> L1E, u -> i_u F
Mat w1_matrix(const Form1<double>& alpha);  // E -> L1E, x -> alpha (x) x
Mat w2_matrix(const Form1<double>& alpha);  // L1E -> L2E, b -> alpha ^ b
Mat wedge_alpha_matrix(const Form1<double>& alpha);  // L1E -> L2E (same as w2)

Mat sigma_alpha(const SymbolData& d, const Form1<double>& alpha);  // L1E -> S20E
Mat H_alpha(const SymbolData& d, const Form1<double>& alpha);      // L1E -> S2E

struct ExactSequenceReport {
  int rank_injection = 0;  // rank of S + w_alpha on TX + E
  int rank_sigma = 0;
  double max_principal_angle = 0;  // between ker sigma and im(S + w_alpha)
  double sigma_w_residual = 0;
  double sigma_S_residual = 0;
  bool exact = false;
};
ExactSequenceReport exact_sequence_check(const SymbolData& d, const Form1<double>& alpha);

// Sigma(alpha) is not self-adjoint in general (S S* and w*w do not commute);
// `eigenvalues` are those of its symmetric part, i.e. of the quadratic form.
struct ParabolicSymbol {
  Mat sigma;  // 12x12 in L1E coordinates
  Vec eigenvalues;
  double max_real_eigenvalue = 0;
  double asymmetry = 0;
};
ParabolicSymbol parabolic_symbol(const SymbolData& d, const Form1<double>& alpha);

// -|alpha|^2 (|phi|^2 + <S*S u, u>).
double uniqueness_symbol(const SymbolData& d, const Form1<double>& alpha, const Eigen::Vector3d& phi,
                         const Vec4<double>& u);

int numerical_rank(const Mat& A, double rel_tol = 1e-10);
// Largest principal angle between the column spans of A and B (Euclidean).
double max_principal_angle(const Mat& A, const Mat& B);

}  // namespace defcon
