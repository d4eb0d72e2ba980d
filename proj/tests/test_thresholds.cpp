#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "wsnest/thresholds.hpp"

using namespace wsnest;

namespace {

Topology complete(std::size_t n) {
  Topology t(n);
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) t.connect(i, j);
  return t;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(LowerBound, Examples) {
  const std::vector<std::size_t> sizes{0, 2};
  const auto lb = feasible_lower_bound(std::span<const std::size_t>(sizes), 0.5);
  EXPECT_DOUBLE_EQ(lb.psi[0], 0.5);
  EXPECT_NEAR(lb.psi[1], 0.125 * std::pow(std::sqrt(8.0) - 2.0, 2), 1e-15);
  EXPECT_NEAR(lb.psi[1], 0.08579, 1e-5);
}

TEST(LowerBound, LargeSetBound) {
  for (std::size_t n : {10u, 50u, 200u}) {
    const std::vector<std::size_t> sizes{n - 1};
    const double g = 0.9;
    const auto lb = feasible_lower_bound(std::span<const std::size_t>(sizes), g);
    const double r5 = std::sqrt(5.0) - 1.0;
    EXPECT_GE(lb.psi[0], g * r5 * r5 / (4.0 * static_cast<double>(n * n)));
  }
}

TEST(LowerBound, IsFeasibleOnRandomGraphs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto theta = two_hop_sets(build_geometric(20, 20.0, 7.6, seed));
    const auto lb = feasible_lower_bound(theta, 0.9);
    for (double s : constraint_residuals(lb, theta)) EXPECT_LE(s, 1e-15);
  }
}

TEST(LowerBound, RejectsGammaOutsideUnitInterval) {
  const std::vector<std::size_t> sizes{1};
  EXPECT_THROW(feasible_lower_bound(std::span<const std::size_t>(sizes), 1.0), std::invalid_argument);
  EXPECT_THROW(feasible_lower_bound(std::span<const std::size_t>(sizes), 0.0), std::invalid_argument);
}

TEST(RhoStar, EmptyAndSymmetric) {
  const std::vector<double> one{0.3};
  EXPECT_DOUBLE_EQ(rho_star(one, 0, TwoHopSet{0, {}}), 1.0);
  const auto theta = two_hop_sets(complete(5));
  const std::vector<double> psi(5, 0.2);
  EXPECT_NEAR(rho_star(psi, 0, theta[0]), 2.0 / 6.0, 1e-15);
}

TEST(Jacobian, EmptyCouplingIsIdentity) {
  const std::vector<TwoHopSet> theta{{0, {}}, {1, {}}, {2, {}}};
  const std::vector<double> psi{0.1, 0.2, 0.3};
  EXPECT_TRUE(constraint_jacobian(psi, theta).isIdentity());
}

TEST(Jacobian, MatchesFiniteDifferences) {
  const auto theta = two_hop_sets(build_geometric(12, 12.0, 5.0, 3));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.05, 0.5);
  std::vector<double> psi(theta.size());
  for (auto& p : psi) p = u(rng);
  const Eigen::MatrixXd J = constraint_jacobian(psi, theta);
  const double h = 1e-6;
  for (std::size_t c = 0; c < psi.size(); ++c) {
    auto up = psi, dn = psi;
    up[c] += h;
    dn[c] -= h;
    const auto su = constraint_residuals(up, theta, 0.9);
    const auto sd = constraint_residuals(dn, theta, 0.9);
    for (std::size_t r = 0; r < psi.size(); ++r)
      EXPECT_NEAR(J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)), (su[r] - sd[r]) / (2 * h), 1e-6);
  }
}

TEST(Solve, SingleNodeGetsGammaMax) {
  const auto theta = two_hop_sets(Topology(1));
  const auto sol = fixed_point_solve(theta, 0.7);
  EXPECT_NEAR(sol.thresholds.psi[0], 0.7, 1e-12);
}

TEST(Solve, CompleteGraphOfTwo) {
  const auto theta = two_hop_sets(complete(2));
  const auto sol = fixed_point_solve(theta, 0.8);
  EXPECT_NEAR(sol.thresholds.psi[0], 0.4, 1e-9);
  EXPECT_NEAR(sol.thresholds.psi[1], 0.4, 1e-9);
}

TEST(Solve, LineOfFive) {
  const auto theta = two_hop_sets(build_line(5));
  ThresholdOptions opts;
  const auto sol = fixed_point_solve(theta, 0.8, opts);
  ASSERT_EQ(sol.thresholds.size(), 5u);
  for (double p : sol.thresholds.psi) EXPECT_GT(p, 0.0);
  EXPECT_LT(max_abs(constraint_residuals(sol.thresholds, theta)), opts.tol);
  EXPECT_NEAR(sol.thresholds.psi[0], sol.thresholds.psi[4], 1e-9);
}

TEST(Solve, RegularGraphsMatchSymmetricForm) {
  for (std::size_t m = 1; m <= 10; ++m)
    for (double g : {0.5, 0.8, 0.95}) {
      const auto theta = two_hop_sets(complete(m + 1));
      const auto sol = fixed_point_solve(theta, g);
      for (double p : sol.thresholds.psi) EXPECT_NEAR(p, g / (1.0 + static_cast<double>(m)), 1e-8);
    }
}

TEST(Solve, CayleyGraphMatchesSymmetricForm) {
  const std::vector<long> gens{1, 3, 4};
  const auto s = symmetric_generators(gens);
  const auto theta = two_hop_sets(build_cayley(15, s));
  const double m = static_cast<double>(theta[0].size());
  const auto sol = fixed_point_solve(theta, 0.9);
  for (double p : sol.thresholds.psi) EXPECT_NEAR(p, 0.9 / (1.0 + m), 1e-8);
}

TEST(Solve, StaysAboveLowerBoundAndIsFast) {
  double iters = 0.0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto theta = two_hop_sets(build_geometric(20, 20.0, 1.7 * std::sqrt(20.0), 100 + seed));
    ThresholdOptions opts;
    opts.tol = 1e-8;
    const auto sol = fixed_point_solve(theta, 0.9, opts);
    const auto lb = feasible_lower_bound(theta, 0.9);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      EXPECT_GE(sol.thresholds.psi[i], lb.psi[i]);
      EXPECT_LE(sol.thresholds.psi[i], 0.9);
    }
    EXPECT_LT(max_abs(constraint_residuals(sol.thresholds, theta)), 1e-8);
    iters += static_cast<double>(sol.iterations);
  }
  EXPECT_LE(iters / 30.0, 20.0);
}

TEST(Solve, IterationCapRaises) {
  const auto theta = two_hop_sets(build_line(6));
  ThresholdOptions opts;
  opts.max_iter = 1;
  try {
    fixed_point_solve(theta, 0.8, opts);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_EQ(e.iterations(), 1u);
    EXPECT_GT(e.residual(), opts.tol);
  }
}

TEST(Csv, NodePsiOneBased) {
  std::ostringstream os;
  write_psi_csv(os, ThresholdVector{{0.25, 0.5}, 0.8});
  EXPECT_EQ(os.str(), "node,psi\n1,0.25\n2,0.5\n");
}
