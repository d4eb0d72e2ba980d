#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace wsnest {

// Node ids are 0-based in code; text formats use 1-based ids.
using NodeId = std::size_t;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// How the coupling set of the threshold constraints is formed.
//   two_hop:      every j != i whose closed neighborhood meets that of i
//   neighborhood: the closed neighborhood of i without i itself
enum class ThetaMode { two_hop, neighborhood };

inline std::string to_string(ThetaMode mode) {
  return mode == ThetaMode::two_hop ? "two_hop" : "neighborhood";
}

inline ThetaMode theta_mode_from_string(const std::string& s) {
  if (s == "two_hop") return ThetaMode::two_hop;
  if (s == "neighborhood") return ThetaMode::neighborhood;
  throw std::invalid_argument("unknown theta mode '" + s + "'");
}

/// Static undirected communication graph. The adjacency relation is
/// symmetric and reflexive: every node is its own neighbor.
class Topology {
 public:
  Topology() = default;

  explicit Topology(std::size_t n) : n_(n), adj_(n * n, 0) {
    for (NodeId i = 0; i < n_; ++i) adj_[i * n_ + i] = 1;
  }

  static Topology from_edges(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges) {
    Topology t(n);
    for (auto [i, j] : edges) t.connect(i, j);
    return t;
  }

  std::size_t size() const noexcept { return n_; }

  bool adjacent(NodeId i, NodeId j) const { return adj_[i * n_ + j] != 0; }

  void connect(NodeId i, NodeId j) {
    if (i >= n_ || j >= n_) throw std::out_of_range("node id out of range");
    adj_[i * n_ + j] = 1;
    adj_[j * n_ + i] = 1;
  }

  /// Closed neighborhood, sorted ascending, including i.
  std::vector<NodeId> neighborhood(NodeId i) const {
    std::vector<NodeId> out;
    for (NodeId j = 0; j < n_; ++j)
      if (adjacent(i, j)) out.push_back(j);
    return out;
  }

  std::size_t degree(NodeId i) const { return neighborhood(i).size() - 1; }

  /// Undirected edges (i < j).
  std::vector<std::pair<NodeId, NodeId>> edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId i = 0; i < n_; ++i)
      for (NodeId j = i + 1; j < n_; ++j)
        if (adjacent(i, j)) out.emplace_back(i, j);
    return out;
  }

  const std::vector<Point>& positions() const noexcept { return positions_; }
  void set_positions(std::vector<Point> p) { positions_ = std::move(p); }

  bool connected() const {
    if (n_ == 0) return true;
    std::vector<char> seen(n_, 0);
    std::vector<NodeId> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      NodeId v = stack.back();
      stack.pop_back();
      for (NodeId w = 0; w < n_; ++w)
        if (adjacent(v, w) && !seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  }

  friend bool operator==(const Topology& a, const Topology& b) {
    if (a.n_ != b.n_ || a.adj_ != b.adj_ || a.positions_.size() != b.positions_.size()) return false;
    for (std::size_t k = 0; k < a.positions_.size(); ++k)
      if (a.positions_[k].x != b.positions_[k].x || a.positions_[k].y != b.positions_[k].y) return false;
    return true;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> adj_;
  std::vector<Point> positions_;
};

/// Unit-disk graph over the given points: i ~ j iff their distance is
/// strictly less than radius.
inline Topology build_geometric(std::span<const Point> points, double radius) {
  Topology t(points.size());
  for (NodeId i = 0; i < points.size(); ++i)
    for (NodeId j = i + 1; j < points.size(); ++j)
      if (std::hypot(points[i].x - points[j].x, points[i].y - points[j].y) < radius) t.connect(i, j);
  t.set_positions({points.begin(), points.end()});
  return t;
}

/// n points uniform in [0, side]^2. Connectivity is not enforced.
inline Topology build_geometric(std::size_t n, double side, double radius, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("geometric graph needs n >= 1");
  if (!(side > 0.0) || !(radius > 0.0)) throw std::invalid_argument("side and radius must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, side);
  std::vector<Point> pts(n);
  for (auto& p : pts) {
    p.x = coord(rng);
    p.y = coord(rng);
  }
  return build_geometric(pts, radius);
}

inline Topology build_line(std::size_t n) {
  if (n < 1) throw std::invalid_argument("line graph needs n >= 1");
  Topology t(n);
  for (NodeId i = 0; i + 1 < n; ++i) t.connect(i, i + 1);
  return t;
}

/// Cayley graph on Z_n: i ~ j iff (i - j) mod n is in the generator set.
/// The set must contain 0 and be closed under negation mod n.
inline Topology build_cayley(std::size_t n, std::span<const long> generators) {
  if (n < 1) throw std::invalid_argument("cayley graph needs n >= 1");
  const long m = static_cast<long>(n);
  auto mod = [m](long a) { return ((a % m) + m) % m; };
  std::vector<char> in_set(n, 0);
  for (long g : generators) in_set[mod(g)] = 1;
  if (!in_set[0]) throw std::invalid_argument("cayley generator set must contain 0");
  for (long g = 0; g < m; ++g)
    if (in_set[g] && !in_set[mod(-g)])
      throw std::invalid_argument("cayley generator set is not closed under inverse: " + std::to_string(g));
  Topology t(n);
  for (long i = 0; i < m; ++i)
    for (long j = i + 1; j < m; ++j)
      if (in_set[mod(i - j)]) t.connect(i, j);
  return t;
}

/// Generators {0, +-g for g in gens}.
inline std::vector<long> symmetric_generators(std::span<const long> gens) {
  std::vector<long> out{0};
  for (long g : gens) {
    out.push_back(g);
    out.push_back(-g);
  }
  return out;
}

struct TwoHopSet {
  NodeId owner = 0;
  std::vector<NodeId> members;  // sorted, never contains owner

  std::size_t size() const noexcept { return members.size(); }
};

namespace detail {

// Rows are closed neighborhoods (sorted) for every node, possibly restricted
// by a loss realization.
inline TwoHopSet two_hop_from_rows(const std::vector<std::vector<NodeId>>& rows, NodeId i, ThetaMode mode) {
  TwoHopSet out{i, {}};
  const std::size_t n = rows.size();
  if (mode == ThetaMode::neighborhood) {
    for (NodeId j : rows[i])
      if (j != i) out.members.push_back(j);
    return out;
  }
  std::vector<char> mark(n, 0);
  for (NodeId k : rows[i]) mark[k] = 1;
  for (NodeId j = 0; j < n; ++j) {
    if (j == i) continue;
    for (NodeId k : rows[j])
      if (mark[k]) {
        out.members.push_back(j);
        break;
      }
  }
  return out;
}

}  // namespace detail

inline TwoHopSet two_hop_set(const Topology& topo, NodeId i, ThetaMode mode = ThetaMode::two_hop) {
  std::vector<std::vector<NodeId>> rows(topo.size());
  for (NodeId j = 0; j < topo.size(); ++j) rows[j] = topo.neighborhood(j);
  return detail::two_hop_from_rows(rows, i, mode);
}

inline std::vector<TwoHopSet> two_hop_sets(const Topology& topo, ThetaMode mode = ThetaMode::two_hop) {
  std::vector<std::vector<NodeId>> rows(topo.size());
  for (NodeId j = 0; j < topo.size(); ++j) rows[j] = topo.neighborhood(j);
  std::vector<TwoHopSet> out;
  out.reserve(topo.size());
  for (NodeId i = 0; i < topo.size(); ++i) out.push_back(detail::two_hop_from_rows(rows, i, mode));
  return out;
}

struct NeighborhoodStats {
  double mean = 0.0;
  std::size_t min = 0;
  std::size_t max = 0;
};

/// Statistics of closed-neighborhood sizes.
inline NeighborhoodStats neighborhood_stats(const Topology& topo) {
  NeighborhoodStats s;
  if (topo.size() == 0) return s;
  s.min = topo.size() + 1;
  std::size_t total = 0;
  for (NodeId i = 0; i < topo.size(); ++i) {
    std::size_t k = topo.degree(i) + 1;
    total += k;
    s.min = std::min(s.min, k);
    s.max = std::max(s.max, k);
  }
  s.mean = static_cast<double>(total) / static_cast<double>(topo.size());
  return s;
}

// Edge list: first line n, then one "i j" per undirected edge, 1-based.
inline void write_edge_list(std::ostream& os, const Topology& topo) {
  os << topo.size() << '\n';
  for (auto [i, j] : topo.edges()) os << (i + 1) << ' ' << (j + 1) << '\n';
}

inline Topology read_edge_list(std::istream& is) {
  std::size_t n = 0;
  if (!(is >> n)) throw std::runtime_error("edge list: missing node count");
  Topology t(n);
  long a = 0, b = 0;
  while (is >> a >> b) {
    if (a < 1 || b < 1 || static_cast<std::size_t>(a) > n || static_cast<std::size_t>(b) > n)
      throw std::runtime_error("edge list: node id out of range");
    t.connect(static_cast<NodeId>(a - 1), static_cast<NodeId>(b - 1));
  }
  if (!is.eof()) throw std::runtime_error("edge list: malformed line");
  return t;
}

}  // namespace wsnest
