#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include <json.hpp>

#include "pgnn/data.hpp"
#include "pgnn/model.hpp"
#include "pgnn/neural_net.hpp"

namespace pgnn {

/// Companion matrix with first row `coeffs` and a shifted identity below.
Eigen::MatrixXd companion_matrix(const Eigen::Ref<const Eigen::VectorXd>& coeffs);

/// Feedforward filter of a PGNN with linear physics and identity transform:
///   x(k+1) = A x(k) + B (theta_r^T phi_r(k) + f(phi_r(k), x(k)) + offset)
///   u_ff(k) = first entry of x(k+1)
/// where x(k) = [u_ff(k-1), ..., u_ff(k-n_b+1)] and phi_r(k) holds the
/// reference samples of the regressor. The network reads raw regressor
/// values and satisfies f(0) = 0; its former value at the origin lives in
/// `offset`.
struct FeedforwardStateSpace {
  RegressorSpec spec;
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  Eigen::VectorXd theta_r;
  Eigen::VectorXd theta_uff;
  NeuralNet<double> nn;
  double offset = 0.0;
  /// Value removed from the network output to put the origin at equilibrium.
  double equilibrium_shift = 0.0;

  Eigen::Index state_size() const { return A.rows(); }
  bool is_static() const { return state_size() == 0; }

  /// u_ff(k) for the given reference window and state.
  double output(const Eigen::Ref<const Eigen::VectorXd>& phi_r,
                const Eigen::Ref<const Eigen::VectorXd>& state) const;
  /// Next state; `u_out` receives u_ff(k) when not null.
  Eigen::VectorXd step(const Eigen::Ref<const Eigen::VectorXd>& state,
                       const Eigen::Ref<const Eigen::VectorXd>& phi_r, double* u_out = nullptr) const;
};

/// Fails for non-linear physics or a non-identity transform.
FeedforwardStateSpace to_state_space(const PgnnModel& m);

/// Elementwise bound K on |df/dphi|, split into reference and past-input parts.
struct LipschitzBound {
  Eigen::VectorXd k;
  Eigen::VectorXd k_r;
  Eigen::VectorXd k_uff;
};

/// Bound of a network reading raw regressors laid out by `spec`.
LipschitzBound lipschitz_bound(const NeuralNet<double>& nn, const RegressorSpec& spec);

/// P with A^T P A - P + Q = 0 (Q defaults to I). Throws NotSchur if A is not Schur.
Eigen::MatrixXd lyapunov_pair(const Eigen::Ref<const Eigen::MatrixXd>& a,
                              const Eigen::Ref<const Eigen::MatrixXd>& q);

/// Optimal beta and the quantities of the stability condition that depend on it.
struct BetaChoice {
  double beta = 0.0;
  double c_beta = 0.0;
  double lambda_min_q = 0.0;
  double rhs = 0.0;
  /// True when the cross term B^T P A A^T P B vanishes and rhs is the beta -> 0 limit.
  bool limit = false;
};

/// c_beta for a given beta > 0.
double c_beta(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
              const Eigen::Ref<const Eigen::MatrixXd>& p, double lambda_min_q, double beta);
/// Right-hand side (1 - beta) lambda_min(Q) / c_beta for a given beta in (0, 1).
double iss_rhs(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
               const Eigen::Ref<const Eigen::MatrixXd>& p, double lambda_min_q, double beta);
BetaChoice optimal_beta(const Eigen::Ref<const Eigen::MatrixXd>& a,
                        const Eigen::Ref<const Eigen::VectorXd>& b,
                        const Eigen::Ref<const Eigen::MatrixXd>& p,
                        const Eigen::Ref<const Eigen::MatrixXd>& q);

struct IssCertificate {
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q;
  double beta = 0.0;
  double c_beta = 0.0;
  double lambda_min_q = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool certified = false;
  /// Static filter (n_b = 1): no state, always certified.
  bool static_filter = false;
  bool beta_limit = false;
  double lyapunov_residual = 0.0;
  LipschitzBound bound;
};

/// Relative margin below which a certificate is refused.
inline constexpr double kCertificateMargin = 1e-9;

/// Checks the stability condition. Throws NotSchur when A is not Schur.
IssCertificate certify_iss(const FeedforwardStateSpace& ss,
                           const std::optional<Eigen::MatrixXd>& q = std::nullopt);

nlohmann::json to_json(const IssCertificate& cert);
/// One-line human-readable verdict.
std::string verdict_summary(const IssCertificate& cert);

/// Training constraint set: the network's past-input Lipschitz bound must
/// stay below `rhs`, with the physics layer fixed. `uff_columns` are the
/// network input columns (raw regressor coordinates of the model) whose bound
/// enters the sum of squares.
struct ThetaConstraint {
  double rhs = 0.0;
  std::vector<Eigen::Index> uff_columns;
  Eigen::MatrixXd A;
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q;
  double beta = 0.0;
  double c_beta = 0.0;
  /// Physics parameters the members must keep (empty: not checked).
  Eigen::VectorXd theta_phy_fixed;

  /// Sum of squared bounds over `uff_columns` for the model's network.
  double lhs(const PgnnModel& m) const;
  double margin(const PgnnModel& m) const { return rhs - lhs(m); }
  bool contains(const PgnnModel& m) const;
  /// Scales W_{L+1} so that lhs = 0.99 rhs when the model is outside the set.
  /// Returns the applied scale (1 when nothing changed).
  double project(PgnnModel& m) const;
};

/// Constraint built from a fixed state matrix. Throws when rhs <= 0 or A is not Schur.
ThetaConstraint theta_constraint(const Eigen::Ref<const Eigen::MatrixXd>& a,
                                 const std::vector<Eigen::Index>& uff_columns,
                                 const std::optional<Eigen::MatrixXd>& q = std::nullopt);
/// Constraint for a model whose own linear physics defines A.
ThetaConstraint theta_constraint_for(const PgnnModel& m,
                                     const std::optional<Eigen::MatrixXd>& q = std::nullopt);

/// Regressor layout with `npw` extra future outputs and `nus` fewer past inputs.
RegressorSpec extend_preview(const RegressorSpec& spec, int npw, int nus);

/// Number of eigenvalues of the companion matrix of `theta_uff` that are not stable.
int count_unstable(const Eigen::Ref<const Eigen::VectorXd>& theta_uff);

}  // namespace pgnn
