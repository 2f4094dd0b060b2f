#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "traffic/graph.hpp"
#include "traffic/rng.hpp"

namespace traffic {

// Precomputed all-pairs hop counts and one next hop per (current, dest)
// pair. Where several neighbors lie on shortest paths, one is chosen
// uniformly at random with tie_seed and stays fixed for the whole run.
// Immutable after construction, safe to share across threads.
class ShortestPathTable {
 public:
  ShortestPathTable(const Graph& graph, uint64_t tie_seed);

  NodeId node_count() const { return n_; }
  uint64_t tie_seed() const { return tie_seed_; }

  // Checked accessors.
  int32_t distance(NodeId u, NodeId v) const;
  NodeId next_hop(NodeId current, NodeId dest) const;

  // Unchecked, for the simulation loop.
  int32_t distance_unchecked(NodeId u, NodeId v) const {
    return dist_[static_cast<size_t>(u) * n_ + v];
  }
  NodeId next_hop_unchecked(NodeId current, NodeId dest) const {
    return next_[static_cast<size_t>(current) * n_ + dest];
  }

 private:
  NodeId n_ = 0;
  uint64_t tie_seed_ = 0;
  std::vector<uint16_t> dist_;  // 0xffff = unreached while building
  std::vector<uint16_t> next_;  // next_[u*n+v] undefined for u == v
};

ShortestPathTable build_shortest_path_table(const Graph& graph, uint64_t tie_seed);

struct LocalRoutingParams {
  double alpha = 0.0;  // forwarding preference exponent
};

// Stochastic local forwarding: if the destination is an immediate neighbor
// it is chosen outright; otherwise neighbor i is picked with probability
// k_i^alpha / sum_j k_j^alpha. No memory: the previous hop is not excluded.
class LocalRouter {
 public:
  LocalRouter(const Graph& graph, LocalRoutingParams params);

  double alpha() const { return params_.alpha; }

  template <class Rng>
  NodeId next_hop(NodeId current, NodeId dest, Rng& rng) const {
    const auto nbrs = graph_->neighbors(current);
    if (std::binary_search(nbrs.begin(), nbrs.end(), dest)) return dest;
    const auto& cum = cumulative_[current];
    const double x = uniform01(rng) * cum.back();
    const auto it = std::upper_bound(cum.begin(), cum.end(), x);
    const size_t idx = std::min(static_cast<size_t>(it - cum.begin()), cum.size() - 1);
    return nbrs[idx];
  }

 private:
  const Graph* graph_;
  LocalRoutingParams params_;
  // Per node, cumulative k^alpha over its sorted neighbor list.
  std::vector<std::vector<double>> cumulative_;
};

}  // namespace traffic
