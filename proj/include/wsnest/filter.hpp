#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsnest/errors.hpp"
#include "wsnest/topology.hpp"

namespace wsnest {

inline constexpr double kDiagonalLoading = 1e-12;
inline constexpr double kMinReciprocalCondition = 1e-12;

struct FilterParams {
  double sigma2 = 1.5;          // measurement noise variance
  double psi = 0.0;             // this node's threshold
  double bisection_tol = 1e-10; // on ||k||^2 - psi
  double forgetting = 0.96;     // covariance estimator memory
};

struct Weights {
  Eigen::VectorXd k;  // on neighbors' previous estimates
  Eigen::VectorXd h;  // on current measurements
};

/// Per-node estimator state. gamma_hat is kept at full network size but only
/// entries inside the node's closed neighborhood are ever read or written.
struct NodeState {
  NodeId id = 0;
  double x = 0.0;
  Eigen::VectorXd k;
  Eigen::VectorXd h;
  double lambda = 0.0;
  Eigen::MatrixXd gamma_hat;
  std::vector<NodeId> active_set;
  double measurement_mean = 0.0;  // mean of the measurements heard at the latest step
};

namespace detail {

inline Eigen::MatrixXd support_block(const Eigen::MatrixXd& m, std::span<const NodeId> support) {
  const auto s = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd b(s, s);
  for (Eigen::Index a = 0; a < s; ++a)
    for (Eigen::Index c = 0; c < s; ++c) b(a, c) = m(support[a], support[c]);
  return b;
}

}  // namespace detail

/// Inverse of the support x support principal block, scattered back into an
/// n x n matrix that is zero elsewhere. For SPD input this is the
/// Moore-Penrose pseudo-inverse of m o (phi phi^T), phi the support indicator.
inline Eigen::MatrixXd masked_pseudoinverse(const Eigen::MatrixXd& m, std::span<const NodeId> support) {
  const Eigen::Index n = m.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  if (support.empty()) return out;
  Eigen::MatrixXd block = detail::support_block(m, support);
  block.diagonal().array() += kDiagonalLoading;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(block);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > kMinReciprocalCondition))
    throw SingularBlock("support block is numerically singular (rcond " + std::to_string(ldlt.rcond()) + ")");
  const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(block.rows(), block.cols()));
  for (Eigen::Index a = 0; a < inv.rows(); ++a)
    for (Eigen::Index c = 0; c < inv.cols(); ++c) out(support[a], support[c]) = inv(a, c);
  return out;
}

/// Closed-form QCQP weights for a fixed multiplier. With A = (gamma_hat +
/// lambda I) o phi phi^T and s = phi^T A^+ phi:
///   k = A^+ phi / (s + m / sigma2),   h = phi / (sigma2 s + m).
inline Weights weights_for_lambda(const Eigen::MatrixXd& gamma_hat, std::span<const NodeId> support, double sigma2,
                                  double lambda) {
  if (support.empty()) throw std::invalid_argument("weights need a nonempty support");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  const Eigen::Index n = gamma_hat.rows();
  Eigen::MatrixXd a = gamma_hat;
  for (NodeId j : support) a(j, j) += lambda;
  const Eigen::MatrixXd a_pinv = masked_pseudoinverse(a, support);

  Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
  for (NodeId j : support) phi(j) = 1.0;
  const Eigen::VectorXd y = a_pinv * phi;
  const double s = phi.dot(y);
  const double m = static_cast<double>(support.size());
  return Weights{y / (s + m / sigma2), phi / (sigma2 * s + m)};
}

/// Spectral form of the local problem on one support. Factorizes the support
/// block of gamma_hat once so ||k(lambda)||^2 costs O(m) per evaluation.
class LocalProblem {
 public:
  LocalProblem(const Eigen::MatrixXd& gamma_hat, std::span<const NodeId> support, double sigma2)
      : sigma2_(sigma2), m_(static_cast<double>(support.size())) {
    if (support.empty()) throw std::invalid_argument("local problem needs a nonempty support");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(detail::support_block(gamma_hat, support));
    if (eig.info() != Eigen::Success) throw SingularBlock("eigen-decomposition of support block failed");
    evals_ = eig.eigenvalues();
    proj_sq_ = (eig.eigenvectors().transpose() * Eigen::VectorXd::Ones(support.size())).array().square();
  }

  double min_eigenvalue() const { return evals_(0); }
  double max_eigenvalue() const { return evals_(evals_.size() - 1); }

  double k_norm2(double lambda) const {
    const Eigen::ArrayXd d = evals_.array() + lambda + kDiagonalLoading;
    if (!(d.minCoeff() > kMinReciprocalCondition * d.maxCoeff()))
      throw SingularBlock("support block is numerically singular at lambda = " + std::to_string(lambda));
    const double s = (proj_sq_ / d).sum();
    const double y2 = (proj_sq_ / d.square()).sum();
    const double denom = s + m_ / sigma2_;
    return y2 / (denom * denom);
  }

  std::size_t support_size() const { return static_cast<std::size_t>(m_); }
  double sigma2() const { return sigma2_; }

 private:
  double sigma2_;
  double m_;
  Eigen::VectorXd evals_;
  Eigen::ArrayXd proj_sq_;
};

/// Smallest lambda >= 0 with ||k(lambda)||^2 <= psi, found by bisection on
/// [0, max(0, sigma2 / sqrt(m psi) - l_min)]. The upper end is doubled (at
/// most 40 times) when it fails to bracket the root. The returned lambda
/// always satisfies the cap; it lies within tol of it when the cap binds.
inline double solve_lambda(const LocalProblem& prob, double psi, double tol) {
  if (!(psi > 0.0)) throw std::invalid_argument("psi must be positive");
  auto g = [&](double lambda) { return prob.k_norm2(lambda) - psi; };
  if (g(0.0) <= 0.0) return 0.0;

  const double m = static_cast<double>(prob.support_size());
  const double nominal = prob.sigma2() / std::sqrt(m * psi);
  double hi = std::max(0.0, nominal - prob.min_eigenvalue());
  if (hi == 0.0) hi = nominal;
  int doublings = 0;
  while (g(hi) > 0.0) {
    if (++doublings > 40)
      throw BisectionFailure("could not bracket the multiplier (upper end " + std::to_string(hi) + ")");
    hi *= 2.0;
  }

  double lo = 0.0;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double gm = g(mid);
    if (gm > 0.0) {
      lo = mid;
    } else {
      hi = mid;
      if (gm > -tol) return mid;
    }
  }
  return hi;
}

inline double solve_lambda(const Eigen::MatrixXd& gamma_hat, std::span<const NodeId> support, double sigma2, double psi,
                           double tol) {
  return solve_lambda(LocalProblem(gamma_hat, support, sigma2), psi, tol);
}

/// x = sum_j k_j x_j(t-1) + sum_j h_j u_j(t).
inline double update_estimate(const Eigen::VectorXd& k, const Eigen::VectorXd& h, const Eigen::VectorXd& prev_estimates,
                              const Eigen::VectorXd& measurements) {
  return k.dot(prev_estimates) + h.dot(measurements);
}

/// Initial state: x = own measurement, diagonal covariance equal to the
/// variance of u_i minus the average of the other received measurements.
/// support0 is what the node heard at t = 0, measurements0 the t = 0 values.
inline NodeState init_state(NodeId id, std::span<const NodeId> neighborhood, std::span<const NodeId> support0,
                            const Eigen::VectorXd& measurements0, double sigma2) {
  const Eigen::Index n = measurements0.size();
  NodeState st;
  st.id = id;
  st.x = measurements0(id);
  st.k = Eigen::VectorXd::Zero(n);
  st.h = Eigen::VectorXd::Zero(n);
  st.h(id) = 1.0;
  st.lambda = 0.0;
  st.gamma_hat = Eigen::MatrixXd::Zero(n, n);
  const std::size_t heard = support0.size();
  const double diag = heard > 1 ? sigma2 * (1.0 + 1.0 / static_cast<double>(heard - 1)) : sigma2;
  for (NodeId j : neighborhood) st.gamma_hat(j, j) = diag;
  st.active_set.assign(support0.begin(), support0.end());
  double sum = 0.0;
  for (NodeId j : support0) sum += measurements0(j);
  st.measurement_mean = heard ? sum / static_cast<double>(heard) : st.x;
  return st;
}

/// Exponentially forgotten outer-product update on the support block.
inline void covariance_update(NodeState& st, std::span<const NodeId> support, const Eigen::VectorXd& residuals,
                              double forgetting) {
  for (NodeId j : support)
    for (NodeId l : support)
      st.gamma_hat(j, l) = forgetting * st.gamma_hat(j, l) + (1.0 - forgetting) * residuals(j) * residuals(l);
}

/// A neighbor heard again after an outage restarts with the largest diagonal
/// entry of the neighborhood and no cross-covariance.
inline void covariance_reinit(NodeState& st, NodeId rejoined, std::span<const NodeId> neighborhood) {
  double top = 0.0;
  for (NodeId j : neighborhood) top = std::max(top, st.gamma_hat(j, j));
  for (NodeId l : neighborhood) {
    if (l == rejoined) continue;
    st.gamma_hat(rejoined, l) = 0.0;
    st.gamma_hat(l, rejoined) = 0.0;
  }
  st.gamma_hat(rejoined, rejoined) = top;
}

struct FilterStepInfo {
  double k_norm2 = 0.0;
  double weight_sum = 0.0;   // sum_j (k_j + h_j) over the support
  double max_eig_loaded = 0.0; // l_M((gamma_hat + lambda I) on the support)
  double max_support_diag = 0.0;
  std::size_t rejoined = 0;
};

/// One synchronous round for node st.id. Reads only the previous-round
/// estimates and the current measurements of the nodes in support.
inline FilterStepInfo filter_step(NodeState& st, const FilterParams& params, std::span<const NodeId> neighborhood,
                                  std::span<const NodeId> support, const Eigen::VectorXd& prev_estimates,
                                  const Eigen::VectorXd& measurements) {
  FilterStepInfo info;

  Eigen::VectorXd residuals = Eigen::VectorXd::Zero(prev_estimates.size());
  for (NodeId j : support) residuals(j) = prev_estimates(j) - st.measurement_mean;
  covariance_update(st, support, residuals, params.forgetting);

  for (NodeId j : support) {
    if (j == st.id) continue;
    if (!std::binary_search(st.active_set.begin(), st.active_set.end(), j)) {
      covariance_reinit(st, j, neighborhood);
      ++info.rejoined;
    }
  }

  const LocalProblem prob(st.gamma_hat, support, params.sigma2);
  st.lambda = solve_lambda(prob, params.psi, params.bisection_tol);
  Weights w = weights_for_lambda(st.gamma_hat, support, params.sigma2, st.lambda);
  st.k = std::move(w.k);
  st.h = std::move(w.h);
  st.x = update_estimate(st.k, st.h, prev_estimates, measurements);

  info.k_norm2 = st.k.squaredNorm();
  info.weight_sum = st.k.sum() + st.h.sum();
  info.max_eig_loaded = prob.max_eigenvalue() + st.lambda;
  for (NodeId j : support) info.max_support_diag = std::max(info.max_support_diag, st.gamma_hat(j, j));

  st.active_set.assign(support.begin(), support.end());
  double sum = 0.0;
  for (NodeId j : support) sum += measurements(j);
  st.measurement_mean = sum / static_cast<double>(support.size());
  return info;
}

}  // namespace wsnest
