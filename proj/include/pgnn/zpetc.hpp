#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

#include <json.hpp>

#include "pgnn/data.hpp"

namespace pgnn {

/// Linear forward model  A(q^-1) y(k) = q^-delay B(q^-1) u(k)  with
/// coefficient vectors in ascending powers of q^-1.
struct LinearForwardModel {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
  int delay = 1;

  std::complex<double> response(double omega) const;
};

/// Forward model equivalent to the linear inverse model u = theta^T phi on `spec`.
LinearForwardModel forward_from_inverse(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                        const RegressorSpec& spec);

/// Zero-phase-error stable inverse
///   G_ff(z) = z^(delay + m) A(z^-1) B_u*(z^-1) / (B_s(z^-1) B_u(1)^2)
/// where B = B_s B_u splits the zeros into stable and unstable sets, m is the
/// number of unstable zeros and B_u* is B_u with reversed coefficients. For a
/// minimum-phase model this is the exact inverse.
struct ZpetcFilter {
  /// Coefficients on r(k + preview - i), i = 0..
  Eigen::VectorXd numerator;
  /// B_s coefficients; the filter solves denominator * u_ff = numerator * r.
  Eigen::VectorXd denominator;
  int preview = 0;
  std::vector<std::complex<double>> stable_zeros;
  std::vector<std::complex<double>> unstable_zeros;
  double gain_correction = 1.0;  // B_u(1)^2

  /// Same filter as a linear inverse model u = theta^T phi on `spec`.
  RegressorSpec spec;
  Eigen::VectorXd theta;

  int unstable_count() const { return static_cast<int>(unstable_zeros.size()); }
  std::complex<double> response(double omega) const;
  /// Spectral radius of the filter's own dynamics (roots of B_s).
  double spectral_radius() const;
};

/// Throws InvalidArgument for zeros within 1e-9 of the unit circle.
ZpetcFilter zpetc_inverse(const LinearForwardModel& g);

/// Roots in z of sum_i c_i z^-i (leading coefficient must be nonzero).
std::vector<std::complex<double>> polynomial_roots(const Eigen::Ref<const Eigen::VectorXd>& coeffs);
/// Ascending-power coefficients of prod_i (1 - r_i z^-1); roots must come in conjugate pairs.
Eigen::VectorXd polynomial_from_roots(const std::vector<std::complex<double>>& roots);

nlohmann::json to_json(const ZpetcFilter& f);

}  // namespace pgnn
