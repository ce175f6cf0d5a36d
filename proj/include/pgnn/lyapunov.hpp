#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <complex>
#include <string>
#include <vector>

#include "pgnn/error.hpp"

namespace pgnn {

/// Eigenvalues with modulus at or above this threshold count as unstable.
inline constexpr double kUnstableModulus = 1.0 - 1e-9;

/// Eigenvalues of `a` with modulus >= kUnstableModulus.
template <typename Derived>
std::vector<std::complex<double>> unstable_eigenvalues(const Eigen::MatrixBase<Derived>& a) {
  std::vector<std::complex<double>> out;
  if (a.rows() == 0) return out;
  const Eigen::MatrixXd ad = a.template cast<double>();
  Eigen::EigenSolver<Eigen::MatrixXd> es(ad, false);
  for (Eigen::Index i = 0; i < ad.rows(); ++i) {
    const std::complex<double> ev = es.eigenvalues()(i);
    if (std::abs(ev) >= kUnstableModulus) out.push_back(ev);
  }
  return out;
}

template <typename Derived>
double spectral_radius(const Eigen::MatrixBase<Derived>& a) {
  if (a.rows() == 0) return 0.0;
  const Eigen::MatrixXd ad = a.template cast<double>();
  return Eigen::EigenSolver<Eigen::MatrixXd>(ad, false).eigenvalues().cwiseAbs().maxCoeff();
}

/// Solves A^T P A - P + Q = 0 for a Schur matrix A.
///
/// Small systems use the vectorized form (I - A^T kron A^T) vec(P) = vec(Q)
/// with one step of iterative refinement; larger ones use the doubling
/// iteration P <- P + A_k^T P A_k, A_k <- A_k^2. Throws NotSchur when some
/// eigenvalue of A has modulus >= kUnstableModulus.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> solve_discrete_lyapunov(
    const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>& a,
    const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>& q) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw InvalidArgument("solve_discrete_lyapunov: A and Q must be square of equal size");
  }
  if (n == 0) return Matrix(0, 0);
  auto bad = unstable_eigenvalues(a);
  if (!bad.empty()) {
    std::string what = "solve_discrete_lyapunov: A is not Schur; eigenvalues with |lambda| >= 1:";
    for (const auto& ev : bad) {
      what += " (" + std::to_string(ev.real()) + (ev.imag() < 0 ? "" : "+") +
              std::to_string(ev.imag()) + "i)";
    }
    throw NotSchur(what, std::move(bad));
  }
  const Matrix qs = Scalar(0.5) * (q + q.transpose());

  Matrix p;
  if (n <= 30) {
    const Matrix at = a.transpose();
    const Matrix lhs = Matrix::Identity(n * n, n * n) - Matrix(Eigen::kroneckerProduct(at, at));
    Eigen::PartialPivLU<Matrix> lu(lhs);
    Vector rhs = qs.reshaped();
    Vector x = lu.solve(rhs);
    x += lu.solve(rhs - lhs * x);
    p = x.reshaped(n, n);
  } else {
    p = qs;
    Matrix ak = a;
    for (int it = 0; it < 200; ++it) {
      const Matrix inc = ak.transpose() * p * ak;
      p += inc;
      if (inc.norm() <= std::numeric_limits<Scalar>::epsilon() * p.norm()) break;
      ak = ak * ak;
    }
  }
  return Scalar(0.5) * (p + p.transpose());
}

}  // namespace pgnn
