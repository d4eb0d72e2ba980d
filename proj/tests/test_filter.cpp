#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "wsnest/filter.hpp"

using namespace wsnest;

namespace {

Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double floor = 0.1) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = g(rng);
  return a * a.transpose() + floor * Eigen::MatrixXd::Identity(n, n);
}

std::vector<NodeId> random_support(std::mt19937_64& rng, std::size_t n) {
  std::vector<NodeId> s;
  std::bernoulli_distribution coin(0.6);
  for (NodeId j = 0; j < n; ++j)
    if (coin(rng)) s.push_back(j);
  if (s.empty()) s.push_back(0);
  return s;
}

Eigen::MatrixXd mask(const Eigen::MatrixXd& m, const std::vector<NodeId>& support) {
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(m.rows());
  for (NodeId j : support) phi(j) = 1.0;
  return m.cwiseProduct(phi * phi.transpose());
}

// SVD pseudo-inverse with the usual relative cutoff.
Eigen::MatrixXd svd_pinv(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cut = 1e-10 * s.maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Minimizer of k^T (G + lambda I) k + sigma2 h^T h subject to sum(k + h) = 1
// on the support, from the KKT linear system.
Weights kkt_weights(const Eigen::MatrixXd& g, const std::vector<NodeId>& support, double sigma2, double lambda) {
  const auto m = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(2 * m + 1, 2 * m + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * m + 1);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) kkt(a, b) = 2.0 * g(support[a], support[b]);
    kkt(a, a) += 2.0 * lambda;
    kkt(m + a, m + a) = 2.0 * sigma2;
    kkt(a, 2 * m) = kkt(m + a, 2 * m) = 1.0;
    kkt(2 * m, a) = kkt(2 * m, m + a) = 1.0;
  }
  rhs(2 * m) = 1.0;
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  Weights w{Eigen::VectorXd::Zero(g.rows()), Eigen::VectorXd::Zero(g.rows())};
  for (Eigen::Index a = 0; a < m; ++a) {
    w.k(support[a]) = sol(a);
    w.h(support[a]) = sol(m + a);
  }
  return w;
}

}  // namespace

TEST(Pseudoinverse, IdentityFullSupport) {
  const std::vector<NodeId> all{0, 1, 2};
  EXPECT_TRUE(masked_pseudoinverse(Eigen::MatrixXd::Identity(3, 3), all).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-11));
}

TEST(Pseudoinverse, DiagonalSingleEntry) {
  Eigen::MatrixXd m(2, 2);
  m << 2, 0, 0, 4;
  const std::vector<NodeId> s{0};
  const Eigen::MatrixXd p = masked_pseudoinverse(m, s);
  EXPECT_NEAR(p(0, 0), 0.5, 1e-12);
  EXPECT_EQ(p(0, 1), 0.0);
  EXPECT_EQ(p(1, 0), 0.0);
  EXPECT_EQ(p(1, 1), 0.0);
}

TEST(Pseudoinverse, MatchesSvdOracle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd m = random_spd(rng, 5);
    const auto s = random_support(rng, 5);
    const Eigen::MatrixXd diff = masked_pseudoinverse(m, s) - svd_pinv(mask(m, s));
    EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Pseudoinverse, SingularBlockRaises) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 1, 1, 1;
  const std::vector<NodeId> s{0, 1};
  EXPECT_THROW(masked_pseudoinverse(m, s), SingularBlock);
}

TEST(Weights, ScalarEqualVariance) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
  g(1, 1) = 1.5;
  const std::vector<NodeId> s{1};
  const Weights w = weights_for_lambda(g, s, 1.5, 0.0);
  EXPECT_NEAR(w.k(1), 0.5, 1e-12);
  EXPECT_NEAR(w.h(1), 0.5, 1e-12);
}

TEST(Weights, ScalarGeneral) {
  Eigen::MatrixXd g(1, 1);
  g << 0.3;
  const std::vector<NodeId> s{0};
  const double sigma2 = 1.5;
  const Weights w = weights_for_lambda(g, s, sigma2, 0.0);
  EXPECT_NEAR(w.k(0), sigma2 / (0.3 + sigma2), 1e-12);
  EXPECT_NEAR(w.h(0), 0.3 / (0.3 + sigma2), 1e-12);
}

TEST(Weights, LargeLambdaRecoversAverage) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd g = random_spd(rng, 4);
  const std::vector<NodeId> s{0, 2, 3};
  const Weights w = weights_for_lambda(g, s, 1.5, 1e9);
  EXPECT_LT(w.k.cwiseAbs().maxCoeff(), 1e-8);
  for (NodeId j : s) EXPECT_NEAR(w.h(j), 1.0 / 3.0, 1e-8);
  EXPECT_EQ(w.h(1), 0.0);
}

TEST(Weights, MatchKktOracleAndSumToOne) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd g = random_spd(rng, 6);
    const auto s = random_support(rng, 6);
    const double lambda = lam(rng);
    const Weights w = weights_for_lambda(g, s, 1.5, lambda);
    const Weights o = kkt_weights(g, s, 1.5, lambda);
    EXPECT_LT((w.k - o.k).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((w.h - o.h).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(w.k.sum() + w.h.sum(), 1.0, 1e-12);
    for (Eigen::Index j = 0; j < 6; ++j)
      if (!std::binary_search(s.begin(), s.end(), static_cast<NodeId>(j))) {
        EXPECT_EQ(w.k(j), 0.0);
        EXPECT_EQ(w.h(j), 0.0);
      }
  }
}

TEST(Weights, VarianceBelowMeasurementAverage) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd g = 0.2 * random_spd(rng, 5);
    const auto s = random_support(rng, 5);
    const double sigma2 = 1.5;
    const Weights w = weights_for_lambda(g, s, sigma2, 0.0);
    const double var = w.k.dot(g * w.k) + sigma2 * w.h.squaredNorm();
    EXPECT_LT(var, sigma2 / static_cast<double>(s.size()));
  }
}

TEST(LocalProblem, NormMatchesWeightsAndIsMonotone) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd g = random_spd(rng, 5);
    const auto s = random_support(rng, 5);
    const LocalProblem prob(g, s, 1.5);
    double prev = prob.k_norm2(0.0);
    for (double lambda = 0.0; lambda < 20.0; lambda += 0.25) {
      const double v = prob.k_norm2(lambda);
      EXPECT_NEAR(v, weights_for_lambda(g, s, 1.5, lambda).k.squaredNorm(), 1e-10);
      EXPECT_LE(v, prev + 1e-15);
      prev = v;
    }
  }
}

TEST(Lambda, InactiveConstraint) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd g = random_spd(rng, 3);
  const std::vector<NodeId> s{0, 1, 2};
  const double k0 = weights_for_lambda(g, s, 1.5, 0.0).k.squaredNorm();
  EXPECT_EQ(solve_lambda(g, s, 1.5, k0 + 1e-6, 1e-12), 0.0);
}

TEST(Lambda, ScalarSupport) {
  Eigen::MatrixXd g(1, 1);
  g << 0.1;
  const std::vector<NodeId> s{0};
  const double lambda = solve_lambda(g, s, 1.5, 0.04, 1e-12);
  const Weights w = weights_for_lambda(g, s, 1.5, lambda);
  EXPECT_NEAR(w.k(0), 0.2, 1e-9);
  EXPECT_NEAR(w.h(0), 0.8, 1e-9);
}

TEST(Lambda, MatchesGridScan) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::MatrixXd g = random_spd(rng, 4, 0.05);
    const std::vector<NodeId> s{0, 1, 2, 3};
    const LocalProblem prob(g, s, 1.5);
    const double psi = 0.2 * prob.k_norm2(0.0);
    const double lambda = solve_lambda(prob, psi, 1e-10);
    EXPECT_GE(prob.k_norm2(lambda), psi - 1e-8);
    EXPECT_LE(prob.k_norm2(lambda), psi);
    // first grid point where the cap holds brackets the root
    const double step = 1e-3;
    double grid = 0.0;
    while (prob.k_norm2(grid) > psi) grid += step;
    EXPECT_GE(lambda, grid - step - 1e-9);
    EXPECT_LE(lambda, grid + 1e-9);
    const double ub = std::max(0.0, 1.5 / std::sqrt(4.0 * psi) - prob.min_eigenvalue());
    EXPECT_LE(lambda, ub + 1e-9);
  }
}

TEST(Update, Arithmetic) {
  Eigen::VectorXd k(2), h(2), prev(2), meas(2);
  k << 0.3, 0.2;
  h << 0.1, 0.4;
  prev << 1, 2;
  meas << 3, 5;
  EXPECT_NEAR(update_estimate(k, h, prev, meas), 3.0, 1e-15);
}

TEST(Update, AverageAndHold) {
  Eigen::VectorXd meas(3), prev(3);
  meas << 1, 2, 6;
  prev << 7, 8, 9;
  EXPECT_NEAR(update_estimate(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Constant(3, 1.0 / 3.0), prev, meas), 3.0, 1e-15);
  Eigen::VectorXd self = Eigen::VectorXd::Zero(3);
  self(1) = 1.0;
  EXPECT_EQ(update_estimate(self, Eigen::VectorXd::Zero(3), prev, meas), 8.0);
}

TEST(Init, MeasurementAndDiagonal) {
  Eigen::VectorXd u(4);
  u << 2.7, 0.0, 1.0, 3.0;
  const std::vector<NodeId> hood{0, 1, 2};
  const NodeState st = init_state(0, hood, hood, u, 1.5);
  EXPECT_EQ(st.x, 2.7);
  EXPECT_EQ(st.lambda, 0.0);
  for (NodeId j : hood) EXPECT_NEAR(st.gamma_hat(j, j), 1.5 * (1.0 + 1.0 / 2.0), 1e-15);
  EXPECT_EQ(st.gamma_hat(0, 1), 0.0);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  EXPECT_EQ(init_state(1, hood, hood, zero, 1.5).x, 0.0);
}

TEST(Covariance, ForgettingExtremes) {
  NodeState st;
  st.gamma_hat = Eigen::MatrixXd::Identity(3, 3);
  const std::vector<NodeId> s{0, 1, 2};
  Eigen::VectorXd r(3);
  r << 1.0, -2.0, 0.5;
  covariance_update(st, s, r, 1.0);
  EXPECT_TRUE(st.gamma_hat.isIdentity());
  covariance_update(st, s, r, 0.0);
  EXPECT_TRUE(st.gamma_hat.isApprox(r * r.transpose()));
}

TEST(Covariance, BlendedDiagonal) {
  NodeState st;
  st.gamma_hat = Eigen::MatrixXd::Identity(2, 2);
  const std::vector<NodeId> s{0, 1};
  covariance_update(st, s, Eigen::VectorXd::Ones(2), 0.9);
  EXPECT_NEAR(st.gamma_hat(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(st.gamma_hat(0, 1), 0.1, 1e-15);
}

TEST(Covariance, OutsideSupportUntouched) {
  NodeState st;
  st.gamma_hat = Eigen::MatrixXd::Identity(3, 3);
  const std::vector<NodeId> s{0, 2};
  covariance_update(st, s, Eigen::VectorXd::Constant(3, 4.0), 0.5);
  EXPECT_EQ(st.gamma_hat(1, 1), 1.0);
  EXPECT_EQ(st.gamma_hat(0, 1), 0.0);
}

TEST(Covariance, RejoinReset) {
  NodeState st;
  st.gamma_hat.resize(2, 2);
  st.gamma_hat << 2, 0.5, 0.5, 1;
  const std::vector<NodeId> hood{0, 1};
  covariance_reinit(st, 1, hood);
  Eigen::MatrixXd expect(2, 2);
  expect << 2, 0, 0, 2;
  EXPECT_EQ(st.gamma_hat, expect);

  NodeState one;
  one.gamma_hat = Eigen::MatrixXd::Constant(1, 1, 0.7);
  const std::vector<NodeId> self{0};
  covariance_reinit(one, 0, self);
  EXPECT_EQ(one.gamma_hat(0, 0), 0.7);
}

TEST(Step, InvariantsOverRandomRounds) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0.0, std::sqrt(1.5));
  std::bernoulli_distribution hear(0.7);
  const std::size_t n = 6;
  const std::vector<NodeId> hood{0, 1, 2, 3, 4, 5};
  Eigen::VectorXd u(n);
  for (auto& v : u) v = noise(rng);
  NodeState st = init_state(0, hood, hood, u, 1.5);
  Eigen::VectorXd prev = u;
  const FilterParams params{1.5, 0.05, 1e-10, 0.96};
  for (int t = 0; t < 300; ++t) {
    std::vector<NodeId> support{0};
    for (NodeId j = 1; j < n; ++j)
      if (hear(rng)) support.push_back(j);
    for (auto& v : u) v = noise(rng);
    const auto info = filter_step(st, params, hood, support, prev, u);
    EXPECT_LT(std::abs(info.weight_sum - 1.0), 1e-9);
    EXPECT_LE(st.k.squaredNorm(), params.psi + 1e-9);
    EXPECT_GE(st.lambda, 0.0);
    EXPECT_TRUE(st.gamma_hat.isApprox(st.gamma_hat.transpose()));
    for (NodeId j = 0; j < n; ++j) {
      EXPECT_GE(st.gamma_hat(j, j), 0.0);
      if (!std::binary_search(support.begin(), support.end(), j)) {
        EXPECT_EQ(st.k(j), 0.0);
        EXPECT_EQ(st.h(j), 0.0);
      }
    }
    EXPECT_EQ(st.active_set, support);
    for (auto& v : prev) v = noise(rng) * 0.3;
  }
}
