#include "pgnn/stability.hpp"

#include <cmath>
#include <sstream>

#include "pgnn/error.hpp"
#include "pgnn/lyapunov.hpp"

namespace pgnn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd companion_matrix(const Eigen::Ref<const VectorXd>& coeffs) {
  const Index n = coeffs.size();
  MatrixXd a = MatrixXd::Zero(n, n);
  if (n == 0) return a;
  a.row(0) = coeffs.transpose();
  if (n > 1) a.bottomLeftCorner(n - 1, n - 1).setIdentity();
  return a;
}

double FeedforwardStateSpace::output(const Eigen::Ref<const VectorXd>& phi_r,
                                     const Eigen::Ref<const VectorXd>& state) const {
  VectorXd phi(phi_r.size() + state.size());
  phi << phi_r, state;
  return theta_r.dot(phi_r) + theta_uff.dot(state) + nn.eval(phi) + offset;
}

VectorXd FeedforwardStateSpace::step(const Eigen::Ref<const VectorXd>& state,
                                     const Eigen::Ref<const VectorXd>& phi_r, double* u_out) const {
  const double u = output(phi_r, state);
  if (u_out) *u_out = u;
  if (is_static()) return VectorXd();
  VectorXd next(state.size());
  next(0) = u;
  next.tail(state.size() - 1) = state.head(state.size() - 1);
  return next;
}

FeedforwardStateSpace to_state_space(const PgnnModel& m) {
  if (m.physics != PhysicsKind::linear) {
    throw InvalidArgument("to_state_space: only linear physics admits the state-space form (got " +
                          to_string(m.physics) + " physics)");
  }
  if (!m.nn.empty() && m.transform != TransformKind::identity) {
    throw InvalidArgument("to_state_space: the network transform must be the identity");
  }
  FeedforwardStateSpace ss;
  ss.spec = m.spec;
  const int nr = m.spec.output_terms();
  const int nu = m.spec.input_terms();
  ss.theta_r = m.theta_phy.head(nr);
  ss.theta_uff = m.theta_phy.tail(nu);
  ss.A = companion_matrix(ss.theta_uff);
  ss.B = VectorXd::Zero(nu);
  if (nu > 0) ss.B(0) = 1.0;
  ss.nn = raw_input_network(m);
  ss.offset = m.offset;
  if (!ss.nn.empty()) {
    const double f0 = ss.nn.eval(VectorXd::Zero(m.spec.size()));
    ss.nn.output_layer().bias(0) -= f0;
    ss.offset += f0;
    ss.equilibrium_shift = f0;
  }
  return ss;
}

LipschitzBound lipschitz_bound(const NeuralNet<double>& nn, const RegressorSpec& spec) {
  LipschitzBound lb;
  if (nn.empty()) {
    lb.k = VectorXd::Zero(spec.size());
  } else {
    if (nn.input_size() != spec.size()) {
      throw InvalidArgument("lipschitz_bound: network width does not match regressor layout");
    }
    lb.k = nn.lipschitz_bound().transpose();
  }
  lb.k_r = lb.k.head(spec.output_terms());
  lb.k_uff = lb.k.tail(spec.input_terms());
  return lb;
}

MatrixXd lyapunov_pair(const Eigen::Ref<const MatrixXd>& a, const Eigen::Ref<const MatrixXd>& q) {
  const MatrixXd p = solve_discrete_lyapunov<double>(a, q);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(q);
  if (q.rows() > 0 && es.eigenvalues().minCoeff() <= 0.0) {
    throw InvalidArgument("lyapunov_pair: Q must be positive definite");
  }
  return p;
}

double c_beta(const Eigen::Ref<const MatrixXd>& a, const Eigen::Ref<const VectorXd>& b,
              const Eigen::Ref<const MatrixXd>& p, double lambda_min_q, double beta) {
  const VectorXd pb = p * b;
  const VectorXd atpb = a.transpose() * pb;
  return b.dot(pb) + atpb.squaredNorm() / (beta * lambda_min_q);
}

double iss_rhs(const Eigen::Ref<const MatrixXd>& a, const Eigen::Ref<const VectorXd>& b,
               const Eigen::Ref<const MatrixXd>& p, double lambda_min_q, double beta) {
  return (1.0 - beta) * lambda_min_q / c_beta(a, b, p, lambda_min_q, beta);
}

BetaChoice optimal_beta(const Eigen::Ref<const MatrixXd>& a, const Eigen::Ref<const VectorXd>& b,
                        const Eigen::Ref<const MatrixXd>& p, const Eigen::Ref<const MatrixXd>& q) {
  BetaChoice out;
  out.lambda_min_q = Eigen::SelfAdjointEigenSolver<MatrixXd>(q).eigenvalues().minCoeff();
  if (!(out.lambda_min_q > 0.0)) throw InvalidArgument("optimal_beta: Q must be positive definite");
  const VectorXd pb = p * b;
  const double pp = b.dot(pb);
  if (!(pp > 0.0)) throw InvalidArgument("optimal_beta: B^T P B must be positive");
  const double s = (a.transpose() * pb).squaredNorm();
  const double lam = out.lambda_min_q;
  if (s <= 1e-300) {
    out.limit = true;
    out.beta = 0.0;
    out.c_beta = pp;
    out.rhs = lam / pp;
    return out;
  }
  // Maximizer of (1 - beta) beta lam^2 / (p beta lam + s) over beta > 0.
  out.beta = (-s + std::sqrt(s * s + pp * lam * s)) / (pp * lam);
  out.c_beta = pp + s / (out.beta * lam);
  out.rhs = (1.0 - out.beta) * lam / out.c_beta;
  return out;
}

IssCertificate certify_iss(const FeedforwardStateSpace& ss, const std::optional<MatrixXd>& q) {
  IssCertificate cert;
  cert.bound = lipschitz_bound(ss.nn, ss.spec);
  const Index n = ss.state_size();
  if (n == 0) {
    cert.static_filter = true;
    cert.certified = true;
    cert.rhs = std::numeric_limits<double>::infinity();
    cert.margin = std::numeric_limits<double>::infinity();
    return cert;
  }
  cert.Q = q ? *q : MatrixXd::Identity(n, n);
  if (cert.Q.rows() != n || cert.Q.cols() != n) {
    throw InvalidArgument("certify_iss: Q must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  cert.P = lyapunov_pair(ss.A, cert.Q);
  cert.lyapunov_residual = (ss.A.transpose() * cert.P * ss.A - cert.P + cert.Q).norm();
  const BetaChoice bc = optimal_beta(ss.A, ss.B, cert.P, cert.Q);
  cert.beta = bc.beta;
  cert.c_beta = bc.c_beta;
  cert.lambda_min_q = bc.lambda_min_q;
  cert.beta_limit = bc.limit;
  cert.rhs = bc.rhs;
  cert.lhs = cert.bound.k_uff.squaredNorm();
  cert.margin = cert.rhs - cert.lhs;
  cert.certified = cert.margin > kCertificateMargin * cert.rhs;
  return cert;
}

namespace {

nlohmann::json matrix_json(const MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const IssCertificate& cert) {
  const auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"certified", cert.certified},
          {"static_filter", cert.static_filter},
          {"beta", cert.beta},
          {"beta_limit", cert.beta_limit},
          {"c_beta", cert.c_beta},
          {"lambda_min_q", cert.lambda_min_q},
          {"lhs", cert.lhs},
          {"rhs", finite_or_null(cert.rhs)},
          {"margin", finite_or_null(cert.margin)},
          {"lyapunov_residual", cert.lyapunov_residual},
          {"P", matrix_json(cert.P)},
          {"Q", matrix_json(cert.Q)},
          {"K", vec(cert.bound.k)},
          {"K_r", vec(cert.bound.k_r)},
          {"K_uff", vec(cert.bound.k_uff)}};
}

std::string verdict_summary(const IssCertificate& cert) {
  std::ostringstream os;
  if (cert.static_filter) {
    os << "CERTIFIED: static feedforward (no past inputs), stable by construction";
    return os.str();
  }
  os << (cert.certified ? "CERTIFIED" : "NOT CERTIFIED") << ": K_uff^T K_uff = " << cert.lhs
     << (cert.certified ? " < " : " >= ") << "rhs = " << cert.rhs << " (margin " << cert.margin
     << ", beta " << cert.beta << ", c_beta " << cert.c_beta << ")";
  return os.str();
}

double ThetaConstraint::lhs(const PgnnModel& m) const {
  if (m.nn.empty()) return 0.0;
  const Eigen::RowVectorXd k = raw_input_network(m).lipschitz_bound();
  double sum = 0.0;
  for (Index c : uff_columns) {
    if (c < 0 || c >= k.size()) throw InvalidArgument("ThetaConstraint: column out of range");
    sum += k(c) * k(c);
  }
  return sum;
}

bool ThetaConstraint::contains(const PgnnModel& m) const {
  if (theta_phy_fixed.size() > 0 && m.theta_phy != theta_phy_fixed) return false;
  return margin(m) > kCertificateMargin * rhs;
}

double ThetaConstraint::project(PgnnModel& m) const {
  if (m.nn.empty()) return 1.0;
  const double value = lhs(m);
  if (rhs - value > kCertificateMargin * rhs) return 1.0;
  const double s = std::sqrt(0.99 * rhs / value);
  m.nn.output_layer().weight *= s;
  return s;
}

ThetaConstraint theta_constraint(const Eigen::Ref<const MatrixXd>& a,
                                 const std::vector<Index>& uff_columns,
                                 const std::optional<MatrixXd>& q) {
  const Index n = a.rows();
  if (n == 0) throw InvalidArgument("theta_constraint: a static filter needs no constraint");
  ThetaConstraint tc;
  tc.A = a;
  tc.Q = q ? *q : MatrixXd::Identity(n, n);
  tc.P = lyapunov_pair(a, tc.Q);
  VectorXd b = VectorXd::Zero(n);
  b(0) = 1.0;
  const BetaChoice bc = optimal_beta(a, b, tc.P, tc.Q);
  if (!(bc.rhs > 0.0)) {
    throw InvalidArgument("theta_constraint: infeasible skeleton (rhs = " + std::to_string(bc.rhs) +
                          ")");
  }
  tc.rhs = bc.rhs;
  tc.beta = bc.beta;
  tc.c_beta = bc.c_beta;
  tc.uff_columns = uff_columns;
  return tc;
}

ThetaConstraint theta_constraint_for(const PgnnModel& m, const std::optional<MatrixXd>& q) {
  if (m.physics != PhysicsKind::linear) {
    throw InvalidArgument("theta_constraint_for: requires linear physics");
  }
  std::vector<Index> cols;
  for (int lag = 1; lag < m.spec.nb; ++lag) cols.push_back(*m.spec.input_index(lag));
  ThetaConstraint tc =
      theta_constraint(companion_matrix(m.theta_phy.tail(m.spec.input_terms())), cols, q);
  tc.theta_phy_fixed = m.theta_phy;
  return tc;
}

RegressorSpec extend_preview(const RegressorSpec& spec, int npw, int nus) {
  spec.validate();
  if (npw < 0 || nus < 0) throw InvalidArgument("extend_preview: n_pw and n_us must be >= 0");
  if (nus > spec.nb - 1) {
    throw InvalidArgument("extend_preview: n_us = " + std::to_string(nus) +
                          " exceeds the number of past inputs " + std::to_string(spec.nb - 1));
  }
  return {spec.na + npw, spec.nb - nus, spec.nk + npw};
}

int count_unstable(const Eigen::Ref<const VectorXd>& theta_uff) {
  return static_cast<int>(unstable_eigenvalues(companion_matrix(theta_uff)).size());
}

}  // namespace pgnn
