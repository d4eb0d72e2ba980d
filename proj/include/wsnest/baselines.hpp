#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include "wsnest/channel.hpp"
#include "wsnest/filter.hpp"

namespace wsnest {

enum class BaselineKind { E1, E2, E3, E4 };

inline std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::E1: return "E1";
    case BaselineKind::E2: return "E2";
    case BaselineKind::E3: return "E3";
    case BaselineKind::E4: return "E4";
  }
  return "?";
}

// combinatorial: L_ii = number of received neighbors, L_ij = -1.
// normalized:    the same rows divided by that count (random-walk form).
enum class LaplacianKind { combinatorial, normalized };

inline std::string to_string(LaplacianKind k) {
  return k == LaplacianKind::combinatorial ? "combinatorial" : "normalized";
}

inline LaplacianKind laplacian_kind_from_string(const std::string& s) {
  if (s == "combinatorial") return LaplacianKind::combinatorial;
  if (s == "normalized") return LaplacianKind::normalized;
  throw std::invalid_argument("unknown laplacian kind '" + s + "'");
}

/// Instantaneous Laplacian of the reception graph, built row-wise from what
/// each node received.
inline Eigen::MatrixXd reception_laplacian(const LossRealization& r, LaplacianKind kind) {
  const auto n = static_cast<Eigen::Index>(r.size());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double deg = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && r.received(i, j)) {
        L(i, j) = -1.0;
        deg += 1.0;
      }
    L(i, i) = deg;
    if (kind == LaplacianKind::normalized && deg > 0.0) L.row(i) /= deg;
  }
  return L;
}

/// E1: K = H = (I - L) / 2.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> laplacian_weights(
    const LossRealization& r, LaplacianKind kind = LaplacianKind::combinatorial) {
  const auto n = static_cast<Eigen::Index>(r.size());
  Eigen::MatrixXd K = 0.5 * (Eigen::MatrixXd::Identity(n, n) - reception_laplacian(r, kind));
  return {K, K};
}

/// E2: k = 0, h uniform over what was heard.
inline Weights average_weights(const LossRealization& r, NodeId i) {
  const auto n = static_cast<Eigen::Index>(r.size());
  const double m = static_cast<double>(realized_neighbor_count(r, i));
  Weights w{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (NodeId j : r.support(i)) w.h(j) = 1.0 / m;
  return w;
}

/// E3: average of the received old estimates plus the own measurement,
/// the node's own slot split evenly between estimate and measurement.
inline Weights old_estimates_plus_own(const LossRealization& r, NodeId i) {
  const auto n = static_cast<Eigen::Index>(r.size());
  const double m = static_cast<double>(realized_neighbor_count(r, i));
  Weights w{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (NodeId j : r.support(i)) w.k(j) = 1.0 / m;
  w.k(i) = 1.0 / (2.0 * m);
  w.h(i) = 1.0 / (2.0 * m);
  return w;
}

/// E4: k = h = 1 / (2 m) on the support.
inline Weights half_half_weights(const LossRealization& r, NodeId i) {
  const auto n = static_cast<Eigen::Index>(r.size());
  const double m = static_cast<double>(realized_neighbor_count(r, i));
  Weights w{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (NodeId j : r.support(i)) {
    w.k(j) = 0.5 / m;
    w.h(j) = 0.5 / m;
  }
  return w;
}

/// Row i of the chosen baseline.
inline Weights baseline_weights(BaselineKind kind, const LossRealization& r, NodeId i,
                                LaplacianKind laplacian = LaplacianKind::combinatorial) {
  switch (kind) {
    case BaselineKind::E1: {
      const Eigen::MatrixXd L = reception_laplacian(r, laplacian);
      Eigen::VectorXd row = -0.5 * L.row(static_cast<Eigen::Index>(i)).transpose();
      row(static_cast<Eigen::Index>(i)) += 0.5;
      return Weights{row, row};
    }
    case BaselineKind::E2: return average_weights(r, i);
    case BaselineKind::E3: return old_estimates_plus_own(r, i);
    case BaselineKind::E4: return half_half_weights(r, i);
  }
  throw std::invalid_argument("unknown baseline");
}

}  // namespace wsnest
