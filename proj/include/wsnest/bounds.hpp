#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace wsnest::bounds {

inline constexpr double kSqrt5Minus1 = 2.2360679774997896964 - 1.0;
inline constexpr std::size_t kMaxGeneratingDegree = 64;

struct BoundInputs {
  std::size_t n_total = 2;            // N
  std::size_t neighborhood_size = 1;  // |N_i|, self included
  double gamma_max = 0.5;
  double sigma2 = 1.0;
  double delta_cap = 0.0;
  std::vector<double> p_vector;  // neighbor links of node i, self excluded
};

/// Limit of the network bias norm: Delta sqrt(N) gamma / (1 - gamma).
inline double asymptotic_bias_bound(double delta_cap, std::size_t n_total, double gamma_max) {
  return delta_cap * std::sqrt(static_cast<double>(n_total)) * gamma_max / (1.0 - gamma_max);
}

/// gamma_max giving per-node bias power upsilon: sqrt(U) / (sqrt(U) + Delta).
inline double gamma_max_from_bias_power(double upsilon, double delta_cap) {
  if (upsilon < 0.0) throw std::invalid_argument("bias power must be nonnegative");
  const double r = std::sqrt(upsilon);
  if (r + delta_cap == 0.0) return 0.0;
  return r / (r + delta_cap);
}

/// Coefficients of prod_j (q_j + p_j z), lowest degree first.
inline std::vector<double> chi_coefficients(std::span<const double> p_vector) {
  if (p_vector.size() > kMaxGeneratingDegree)
    throw std::invalid_argument("generating function degree above 64 is not supported");
  std::vector<double> c{1.0};
  for (double p : p_vector) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probability outside [0,1]");
    const double q = 1.0 - p;
    std::vector<double> next(c.size() + 1, 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
      next[k] += q * c[k];
      next[k + 1] += p * c[k];
    }
    c.swap(next);
  }
  return c;
}

/// E[1 / (phi^T phi)] = sum_k chi(k) / (k + 1).
inline double expected_inverse_count(std::span<const double> p_vector) {
  const auto chi = chi_coefficients(p_vector);
  double s = 0.0;
  for (std::size_t k = 0; k < chi.size(); ++k) s += chi[k] / static_cast<double>(k + 1);
  return s;
}

/// Identical links: (1 - q^m) / ((1 - q) m), with the q = 1 limit equal to 1.
inline double uniform_q_factor(double q, std::size_t neighborhood_size) {
  if (neighborhood_size == 0) throw std::invalid_argument("neighborhood size must be >= 1");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("q outside [0,1]");
  const double m = static_cast<double>(neighborhood_size);
  if (q == 0.0) return 1.0 / m;
  if (q == 1.0) return 1.0;
  return (1.0 - std::pow(q, m)) / ((1.0 - q) * m);
}

/// ((sqrt5-1) sqrt(g) + 2N) / (2 (sqrt5-1) sqrt(g) + 2N).
inline double variance_first_factor(std::size_t n_total, double gamma_max) {
  const double a = kSqrt5Minus1 * std::sqrt(gamma_max);
  const double two_n = 2.0 * static_cast<double>(n_total);
  return (a + two_n) / (2.0 * a + two_n);
}

inline double variance_upper_bound(const BoundInputs& in) {
  return variance_first_factor(in.n_total, in.gamma_max) * in.sigma2 * expected_inverse_count(in.p_vector);
}

/// Strict upper bound on l_M((P + lambda I) o phi phi^T).
inline double multiplier_sup_bound(std::size_t n_total, double gamma_max, double sigma2) {
  return sigma2 * (1.0 + 2.0 * static_cast<double>(n_total) / (kSqrt5Minus1 * std::sqrt(gamma_max)));
}

/// Variance of the measurement-average estimator.
inline double benchmark_variance(std::span<const double> p_vector, double sigma2) {
  return sigma2 * expected_inverse_count(p_vector);
}

enum class LinePosition { extreme, interior };

inline std::size_t theta_bound_line(LinePosition pos) { return pos == LinePosition::extreme ? 2 : 3; }

inline std::size_t theta_bound_cayley(std::size_t nu) { return 2 * nu + 1; }

}  // namespace wsnest::bounds
