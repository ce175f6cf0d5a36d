#pragma once

// Shared helpers and independent oracles for the test binaries.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "pgnn/data.hpp"
#include "pgnn/extrap.hpp"
#include "pgnn/model.hpp"
#include "pgnn/neural_net.hpp"
#include "pgnn/random.hpp"

namespace support {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd random_vector(pgnn::Rng& rng, Index n, double lo = -1.0, double hi = 1.0) {
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = pgnn::uniform(rng, lo, hi);
  return v;
}

inline MatrixXd random_matrix(pgnn::Rng& rng, Index r, Index c, double lo = -1.0, double hi = 1.0) {
  MatrixXd m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = pgnn::uniform(rng, lo, hi);
  return m;
}

/// Network with the given widths and uniform random parameters.
inline pgnn::NeuralNet<double> random_net(pgnn::Rng& rng, Index inputs, const std::vector<Index>& hidden,
                                          double scale = 1.0) {
  auto nn = pgnn::NeuralNet<double>::zeros(inputs, hidden);
  nn.unflatten(random_vector(rng, nn.param_count(), -scale, scale));
  return nn;
}

/// Central difference gradient of a scalar function.
template <typename F>
VectorXd central_gradient(F&& f, const VectorXd& x, double h = 1e-6) {
  VectorXd g(x.size());
  VectorXd xp = x, xm = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    xm(i) = x(i) - h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return g;
}

/// Largest elementwise relative error with an absolute floor on the denominator.
inline double relative_error(const VectorXd& a, const VectorXd& b, double floor = 1e-9) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
  }
  return worst;
}

/// Stable matrix with spectral radius below `radius`: a random matrix scaled by
/// its 2-norm bound.
inline MatrixXd random_stable(pgnn::Rng& rng, Index n, double radius = 0.95) {
  MatrixXd a = random_matrix(rng, n, n);
  const double norm = a.operatorNorm();
  if (norm > 0.0) a *= pgnn::uniform(rng, 0.05, radius) / norm;
  return a;
}

/// Past-input coefficients whose companion matrix has the given eigenvalues
/// (real ones and conjugate pairs drawn inside `radius`).
inline VectorXd stable_companion_coeffs(pgnn::Rng& rng, Index n, double radius) {
  std::vector<std::complex<double>> roots;
  while (static_cast<Index>(roots.size()) < n) {
    if (n - static_cast<Index>(roots.size()) >= 2 && pgnn::uniform01(rng) < 0.5) {
      const std::complex<double> z = std::polar(pgnn::uniform(rng, 0.0, radius), pgnn::uniform(rng, 0.0, M_PI));
      roots.push_back(z);
      roots.push_back(std::conj(z));
    } else {
      roots.push_back(pgnn::uniform(rng, -radius, radius));
    }
  }
  // z^n - a_1 z^(n-1) - ... - a_n has first companion row [a_1 ... a_n].
  Eigen::VectorXcd poly = Eigen::VectorXcd::Ones(1);
  for (const auto& r : roots) {
    Eigen::VectorXcd next = Eigen::VectorXcd::Zero(poly.size() + 1);
    next.head(poly.size()) += poly;
    next.tail(poly.size()) -= r * poly;
    poly = next;
  }
  return -poly.real().tail(n);
}

/// Region grid built by an odometer over the axes, first axis slowest.
inline MatrixXd oracle_grid(const pgnn::OperatingRegion& region) {
  const Index d = region.dims();
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  std::vector<VectorXd> cols;
  while (true) {
    VectorXd p(d);
    for (Index a = 0; a < d; ++a) {
      const auto& ax = region.axes[static_cast<std::size_t>(a)];
      p(a) = ax.lo + (ax.hi - ax.lo) * static_cast<double>(idx[static_cast<std::size_t>(a)]) / (ax.resolution - 1);
    }
    cols.push_back(p);
    Index a = d - 1;
    while (a >= 0 && ++idx[static_cast<std::size_t>(a)] == region.axes[static_cast<std::size_t>(a)].resolution) {
      idx[static_cast<std::size_t>(a)] = 0;
      --a;
    }
    if (a < 0) break;
  }
  MatrixXd out(d, static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = cols[i];
  return out;
}

/// Result of the brute-force farthest-point selection.
struct GreedyResult {
  std::vector<Index> index;
  std::vector<double> objective;
};

/// Farthest-point selection by explicit loops: every candidate is compared
/// against every data point and every selected point. Coordinates are scaled
/// by the reciprocal axis width.
inline GreedyResult brute_force_greedy(const MatrixXd& grid, const MatrixXd& data, const VectorXd& widths,
                                       Index max_points, double eps) {
  const Index d = grid.rows();
  const VectorXd inv = widths.cwiseInverse();
  auto dist2 = [&](const VectorXd& a, const VectorXd& b) {
    double s = 0.0;
    for (Index i = 0; i < d; ++i) {
      const double diff = a(i) * inv(i) - b(i) * inv(i);
      s += diff * diff;
    }
    return s;
  };
  GreedyResult out;
  std::vector<VectorXd> pool;
  for (Index j = 0; j < data.cols(); ++j) pool.push_back(data.col(j));
  while (static_cast<Index>(out.index.size()) < max_points) {
    double best = -1.0;
    Index best_i = -1;
    for (Index i = 0; i < grid.cols(); ++i) {
      double c = std::numeric_limits<double>::infinity();
      for (const VectorXd& p : pool) c = std::min(c, dist2(grid.col(i), p));
      if (c > best) {
        best = c;
        best_i = i;
      }
    }
    if (best_i < 0 || best <= eps) break;
    out.index.push_back(best_i);
    out.objective.push_back(best);
    pool.push_back(grid.col(best_i));
  }
  return out;
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
inline MatrixXd expm_taylor(const MatrixXd& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const MatrixXd scaled = a / std::ldexp(1.0, squarings);
  MatrixXd sum = MatrixXd::Identity(a.rows(), a.cols());
  MatrixXd term = sum;
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

/// Zero-order-hold pair (Ad, Bd) from the exponential of the augmented matrix.
inline void zoh_oracle(const MatrixXd& a, const VectorXd& b, double ts, MatrixXd& ad, VectorXd& bd) {
  const Index n = a.rows();
  MatrixXd aug = MatrixXd::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = a * ts;
  aug.topRightCorner(n, 1) = b * ts;
  const MatrixXd e = expm_taylor(aug);
  ad = e.topLeftCorner(n, n);
  bd = e.topRightCorner(n, 1);
}

/// Characteristic polynomial det(zI - A) in descending powers (Faddeev-LeVerrier).
inline VectorXd charpoly(const MatrixXd& a) {
  const Index n = a.rows();
  VectorXd c(n + 1);
  c(0) = 1.0;
  MatrixXd m = MatrixXd::Zero(n, n);
  for (Index k = 1; k <= n; ++k) {
    m = a * m + c(k - 1) * MatrixXd::Identity(n, n);
    c(k) = -(a * m).trace() / static_cast<double>(k);
  }
  return c;
}

/// Numerator of C (zI - A)^-1 B, descending powers, length n + 1 with a
/// leading zero: det(zI - A + B C) - det(zI - A).
inline VectorXd transfer_numerator(const MatrixXd& a, const VectorXd& b, const Eigen::RowVectorXd& c) {
  return charpoly(a - b * c) - charpoly(a);
}

/// Signal log from a user-supplied output and input sequence.
inline pgnn::SignalLog make_log(const VectorXd& u, const VectorXd& y, double ts) {
  pgnn::SignalLog log;
  log.ts = ts;
  log.u = u;
  log.y = y;
  log.t = VectorXd::LinSpaced(u.size(), 0.0, ts * static_cast<double>(u.size() - 1));
  return log;
}

}  // namespace support
