#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "wsnest/topology.hpp"

namespace wsnest {

/// Per-link packet success probabilities. p(i, j) is the probability that
/// node i receives the packet broadcast by node j.
class LossModel {
 public:
  LossModel() = default;

  /// Entries off the adjacency pattern are forced to 0 and the diagonal to 1.
  LossModel(const Topology& topo, Eigen::MatrixXd p) : p_(std::move(p)) {
    const auto n = static_cast<Eigen::Index>(topo.size());
    if (p_.rows() != n || p_.cols() != n) throw std::invalid_argument("loss model size mismatch");
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        double& v = p_(i, j);
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("success probability outside [0,1]");
        if (i == j) v = 1.0;
        else if (!topo.adjacent(i, j)) v = 0.0;
      }
  }

  /// Identical loss probability q on every link.
  static LossModel uniform(const Topology& topo, double q) {
    const auto n = static_cast<Eigen::Index>(topo.size());
    return LossModel(topo, Eigen::MatrixXd::Constant(n, n, 1.0 - q));
  }

  /// Static heterogeneous links: each undirected link draws its loss
  /// probability once, uniform in [q_mean - jitter, q_mean + jitter] clipped
  /// to [0, 1].
  static LossModel jittered(const Topology& topo, double q_mean, double jitter, std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(topo.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-jitter, jitter);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (!topo.adjacent(i, j)) continue;
        double q = jitter > 0.0 ? std::clamp(q_mean + u(rng), 0.0, 1.0) : std::clamp(q_mean, 0.0, 1.0);
        p(i, j) = p(j, i) = 1.0 - q;
      }
    return LossModel(topo, std::move(p));
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(p_.rows()); }
  double p(NodeId i, NodeId j) const { return p_(i, j); }
  const Eigen::MatrixXd& probabilities() const noexcept { return p_; }

  /// Success probabilities of node i's links to its neighbors, self excluded.
  std::vector<double> link_probabilities(NodeId i) const {
    std::vector<double> out;
    for (Eigen::Index j = 0; j < p_.cols(); ++j)
      if (static_cast<NodeId>(j) != i && p_(i, j) > 0.0) out.push_back(p_(i, j));
    return out;
  }

 private:
  Eigen::MatrixXd p_;
};

/// Binary reception matrix at one step. Row i is what node i received.
class LossRealization {
 public:
  LossRealization() = default;
  explicit LossRealization(std::size_t n) : n_(n), phi_(n * n, 0) {
    for (NodeId i = 0; i < n; ++i) phi_[i * n + i] = 1;
  }

  std::size_t size() const noexcept { return n_; }
  bool received(NodeId i, NodeId j) const { return phi_[i * n_ + j] != 0; }
  void set(NodeId i, NodeId j, bool v) { phi_[i * n_ + j] = v ? 1 : 0; }

  /// Realized closed neighborhood of node i, sorted.
  std::vector<NodeId> support(NodeId i) const {
    std::vector<NodeId> out;
    for (NodeId j = 0; j < n_; ++j)
      if (received(i, j)) out.push_back(j);
    return out;
  }

  friend bool operator==(const LossRealization&, const LossRealization&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> phi_;
};

/// Every link of the topology delivers.
inline LossRealization full_realization(const Topology& topo) {
  LossRealization r(topo.size());
  for (NodeId i = 0; i < topo.size(); ++i)
    for (NodeId j = 0; j < topo.size(); ++j)
      if (topo.adjacent(i, j)) r.set(i, j, true);
  return r;
}

/// Independent Bernoulli draw per directed link with p strictly inside (0,1).
/// With symmetric = true, one draw per undirected link is mirrored to both
/// directions (the link then uses p(i, j) for i < j).
template <class Rng>
LossRealization sample_realization(const LossModel& model, Rng& rng, bool symmetric = false) {
  const std::size_t n = model.size();
  LossRealization r(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = 0; j < n; ++j) {
      if (i == j) continue;
      if (symmetric && j < i) {
        r.set(i, j, r.received(j, i));
        continue;
      }
      const double p = model.p(i, j);
      if (p >= 1.0) r.set(i, j, true);
      else if (p > 0.0) r.set(i, j, u(rng) < p);
    }
  return r;
}

inline std::size_t realized_neighbor_count(const LossRealization& r, NodeId i) {
  std::size_t c = 0;
  for (NodeId j = 0; j < r.size(); ++j) c += r.received(i, j) ? 1 : 0;
  return c;
}

/// Coupling sets restricted to the links active in a realization.
inline std::vector<TwoHopSet> two_hop_sets(const LossRealization& r, ThetaMode mode = ThetaMode::two_hop) {
  std::vector<std::vector<NodeId>> rows(r.size());
  for (NodeId j = 0; j < r.size(); ++j) rows[j] = r.support(j);
  std::vector<TwoHopSet> out;
  for (NodeId i = 0; i < r.size(); ++i) out.push_back(detail::two_hop_from_rows(rows, i, mode));
  return out;
}

inline TwoHopSet two_hop_set(const Topology& topo, NodeId i, const LossRealization& r,
                             ThetaMode mode = ThetaMode::two_hop) {
  if (r.size() != topo.size()) throw std::invalid_argument("realization size mismatch");
  std::vector<std::vector<NodeId>> rows(r.size());
  for (NodeId j = 0; j < r.size(); ++j) {
    for (NodeId k = 0; k < r.size(); ++k)
      if (r.received(j, k) && topo.adjacent(j, k)) rows[j].push_back(k);
  }
  return detail::two_hop_from_rows(rows, i, mode);
}

// Dense text block: first line n, then n rows of n probabilities.
inline void write_loss_model(std::ostream& os, const LossModel& m) {
  const auto& p = m.probabilities();
  os << p.rows() << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) os << (j ? " " : "") << p(i, j);
    os << '\n';
  }
}

inline LossModel read_loss_model(std::istream& is, const Topology& topo) {
  Eigen::Index n = 0;
  if (!(is >> n) || n != static_cast<Eigen::Index>(topo.size()))
    throw std::runtime_error("loss model: bad size line");
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (!(is >> p(i, j))) throw std::runtime_error("loss model: truncated matrix");
  return LossModel(topo, std::move(p));
}

}  // namespace wsnest
