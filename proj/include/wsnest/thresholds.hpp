#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsnest/errors.hpp"
#include "wsnest/topology.hpp"

namespace wsnest {

/// Per-node caps psi_i on ||k_i o phi_i||^2. Together they keep the
/// spectral norm of the network weight matrix under gamma_max.
struct ThresholdVector {
  std::vector<double> psi;
  double gamma_max = 0.0;

  std::size_t size() const noexcept { return psi.size(); }
  double operator[](NodeId i) const { return psi[i]; }
};

struct ThresholdOptions {
  double tol = 1e-10;
  std::size_t max_iter = 10000;
};

struct ThresholdSolution {
  ThresholdVector thresholds;
  std::size_t iterations = 0;
  double residual = 0.0;   // max_i |S_i| at exit
  double max_alpha = 0.0;  // largest contraction modulus seen for an active component
  bool used_fallback_step = false;
  std::size_t undominated_steps = 0;  // component updates taken where rho_star returned 0
};

inline void check_gamma_max(double gamma_max) {
  if (!(gamma_max > 0.0 && gamma_max < 1.0))
    throw std::invalid_argument("gamma_max must lie in (0,1), got " + std::to_string(gamma_max));
}

/// Closed-form feasible point: psi_i = (gamma/4) (sqrt(m^2 + 4) - m)^2, m = |Theta_i|.
inline ThresholdVector feasible_lower_bound(std::span<const std::size_t> theta_sizes, double gamma_max) {
  check_gamma_max(gamma_max);
  ThresholdVector out{std::vector<double>(theta_sizes.size()), gamma_max};
  for (std::size_t i = 0; i < theta_sizes.size(); ++i) {
    const double m = static_cast<double>(theta_sizes[i]);
    const double r = std::sqrt(m * m + 4.0) - m;
    out.psi[i] = 0.25 * gamma_max * r * r;
  }
  return out;
}

inline ThresholdVector feasible_lower_bound(std::span<const TwoHopSet> theta, double gamma_max) {
  std::vector<std::size_t> sizes;
  sizes.reserve(theta.size());
  for (const auto& t : theta) sizes.push_back(t.size());
  return feasible_lower_bound(std::span<const std::size_t>(sizes), gamma_max);
}

namespace detail {

inline double sqrt_sum(std::span<const double> psi, const TwoHopSet& theta) {
  double s = 0.0;
  for (NodeId j : theta.members) s += std::sqrt(psi[j]);
  return s;
}

}  // namespace detail

/// S_i(psi) = psi_i + sqrt(psi_i) sum_{j in Theta_i} sqrt(psi_j) - gamma_max.
inline std::vector<double> constraint_residuals(std::span<const double> psi, std::span<const TwoHopSet> theta,
                                                double gamma_max) {
  std::vector<double> s(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i)
    s[i] = psi[i] + std::sqrt(psi[i]) * detail::sqrt_sum(psi, theta[i]) - gamma_max;
  return s;
}

inline std::vector<double> constraint_residuals(const ThresholdVector& t, std::span<const TwoHopSet> theta) {
  return constraint_residuals(std::span<const double>(t.psi), theta, t.gamma_max);
}

/// Step size with the smallest contraction modulus for component i, or 0
/// when the diagonal term does not dominate.
inline double rho_star(std::span<const double> psi, NodeId i, const TwoHopSet& theta_i) {
  const double root_i = std::sqrt(psi[i]);
  double sum_root = 0.0;
  double cross = 0.0;
  for (NodeId j : theta_i.members) {
    const double root_j = std::sqrt(psi[j]);
    sum_root += root_j;
    cross += root_i / (2.0 * root_j);
  }
  const double diag = 1.0 + sum_root / (2.0 * root_i);
  if (diag >= cross) return 2.0 * root_i / (2.0 * root_i + sum_root);
  return 0.0;
}

/// alpha_i = |1 - rho J_ii| + rho sum_j sqrt(psi_i)/(2 sqrt(psi_j)).
inline double contraction_modulus(std::span<const double> psi, NodeId i, const TwoHopSet& theta_i, double rho) {
  const double root_i = std::sqrt(psi[i]);
  double sum_root = 0.0;
  double cross = 0.0;
  for (NodeId j : theta_i.members) {
    const double root_j = std::sqrt(psi[j]);
    sum_root += root_j;
    cross += root_i / (2.0 * root_j);
  }
  return std::abs(1.0 - rho * (1.0 + sum_root / (2.0 * root_i))) + rho * cross;
}

/// Jacobian of S: J_ii = 1 + sum_j sqrt(psi_j) / (2 sqrt(psi_i)) and
/// J_ji = sqrt(psi_j) / (2 sqrt(psi_i)) for j in Theta_i.
inline Eigen::MatrixXd constraint_jacobian(std::span<const double> psi, std::span<const TwoHopSet> theta) {
  const auto n = static_cast<Eigen::Index>(psi.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double root_i = std::sqrt(psi[i]);
    J(i, i) = 1.0 + detail::sqrt_sum(psi, theta[i]) / (2.0 * root_i);
    for (NodeId j : theta[i].members) J(static_cast<Eigen::Index>(j), i) = std::sqrt(psi[j]) / (2.0 * root_i);
  }
  return J;
}

/// Component sweep psi_i <- psi_i - rho_i S_i(psi), started from the
/// closed-form feasible point. Components are updated in place in node
/// order, so later nodes in a sweep already see the new values of earlier
/// ones. Iterates are kept inside the box [psi_lower, gamma_max], which
/// contains the fixed point.
inline ThresholdSolution fixed_point_solve(std::span<const TwoHopSet> theta, double gamma_max,
                                           const ThresholdOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("tol must be positive");
  const ThresholdVector lower = feasible_lower_bound(theta, gamma_max);
  const std::size_t n = theta.size();

  ThresholdSolution sol;
  sol.thresholds = lower;
  auto& psi = sol.thresholds.psi;
  const std::span<const double> view(psi);

  for (;;) {
    const auto s = constraint_residuals(view, theta, gamma_max);
    double worst = 0.0;
    for (double v : s) worst = std::max(worst, std::abs(v));
    sol.residual = worst;
    if (worst < opts.tol) return sol;
    if (sol.iterations >= opts.max_iter)
      throw NonConvergence("threshold iteration did not converge in " + std::to_string(opts.max_iter) +
                               " sweeps (residual " + std::to_string(worst) + ")",
                           sol.iterations, worst);

    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double si = psi[i] + std::sqrt(psi[i]) * detail::sqrt_sum(view, theta[i]) - gamma_max;
      if (si == 0.0) continue;
      double rho = rho_star(view, i, theta[i]);
      if (rho > 0.0) {
        const double alpha = contraction_modulus(view, i, theta[i], rho);
        sol.max_alpha = std::max(sol.max_alpha, alpha);
        assert(alpha <= 1.0 + 1e-12);
      } else {
        // Diagonal dominance fails at this iterate: take the same step
        // anyway; the residual check above decides convergence.
        ++sol.undominated_steps;
        const double root_i = std::sqrt(psi[i]);
        rho = 2.0 * root_i / (2.0 * root_i + detail::sqrt_sum(view, theta[i]));
      }
      const double updated = std::clamp(psi[i] - rho * si, lower.psi[i], gamma_max);
      moved = moved || updated != psi[i];
      psi[i] = updated;
    }
    if (!moved) {
      // Every update was clipped by the box; take the conservative step instead.
      sol.used_fallback_step = true;
      for (std::size_t i = 0; i < n; ++i) {
        const double si = psi[i] + std::sqrt(psi[i]) * detail::sqrt_sum(view, theta[i]) - gamma_max;
        const double rho = 1.0 / (2.0 + static_cast<double>(theta[i].size()));
        psi[i] = std::clamp(psi[i] - rho * si, lower.psi[i], gamma_max);
      }
    }
    ++sol.iterations;
  }
}

/// CSV "node,psi" with 1-based node ids.
inline void write_psi_csv(std::ostream& os, const ThresholdVector& t) {
  os << "node,psi\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < t.psi.size(); ++i) os << (i + 1) << ',' << t.psi[i] << '\n';
  os.precision(old);
}

}  // namespace wsnest
