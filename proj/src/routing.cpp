#include "traffic/routing.hpp"

#include <cmath>
#include <stdexcept>

namespace traffic {

ShortestPathTable::ShortestPathTable(const Graph& graph, uint64_t tie_seed)
    : n_(graph.node_count()), tie_seed_(tie_seed) {
  if (n_ >= 0xffff) throw std::invalid_argument("shortest paths: graph too large for table");
  dist_.assign(static_cast<size_t>(n_) * n_, 0xffff);
  next_.assign(static_cast<size_t>(n_) * n_, 0);

  SplitMix64 rng(tie_seed);
  std::vector<NodeId> frontier, next_frontier, candidates;
  frontier.reserve(n_);
  next_frontier.reserve(n_);

  // One BFS per destination fills a column of hop counts; ties among
  // minimal next hops are broken uniformly at random, in fixed (dest, node)
  // order so the same seed reproduces the same table.
  for (NodeId t = 0; t < n_; ++t) {
    frontier.clear();
    frontier.push_back(t);
    dist_[static_cast<size_t>(t) * n_ + t] = 0;
    uint16_t level = 0;
    NodeId reached = 1;
    while (!frontier.empty()) {
      ++level;
      next_frontier.clear();
      for (NodeId u : frontier) {
        for (NodeId w : graph.neighbors(u)) {
          uint16_t& d = dist_[static_cast<size_t>(w) * n_ + t];
          if (d == 0xffff) {
            d = level;
            next_frontier.push_back(w);
            ++reached;
          }
        }
      }
      frontier.swap(next_frontier);
    }
    if (reached != n_)
      throw std::invalid_argument("shortest paths: graph is disconnected, unreachable pair");

    for (NodeId u = 0; u < n_; ++u) {
      if (u == t) continue;
      const uint16_t du = dist_[static_cast<size_t>(u) * n_ + t];
      candidates.clear();
      for (NodeId w : graph.neighbors(u)) {
        if (dist_[static_cast<size_t>(w) * n_ + t] + 1 == du) candidates.push_back(w);
      }
      const NodeId pick =
          candidates.size() == 1
              ? candidates[0]
              : candidates[uniform_below(rng, candidates.size())];
      next_[static_cast<size_t>(u) * n_ + t] = static_cast<uint16_t>(pick);
    }
  }
}

int32_t ShortestPathTable::distance(NodeId u, NodeId v) const {
  if (u < 0 || v < 0 || u >= n_ || v >= n_)
    throw std::out_of_range("shortest paths: node index out of range");
  return distance_unchecked(u, v);
}

NodeId ShortestPathTable::next_hop(NodeId current, NodeId dest) const {
  if (current < 0 || dest < 0 || current >= n_ || dest >= n_)
    throw std::out_of_range("shortest paths: node index out of range");
  if (current == dest) throw std::invalid_argument("shortest paths: current == dest");
  return next_hop_unchecked(current, dest);
}

ShortestPathTable build_shortest_path_table(const Graph& graph, uint64_t tie_seed) {
  return ShortestPathTable(graph, tie_seed);
}

LocalRouter::LocalRouter(const Graph& graph, LocalRoutingParams params)
    : graph_(&graph), params_(params) {
  if (!std::isfinite(params.alpha))
    throw std::invalid_argument("local routing: alpha must be finite");
  const NodeId n = graph.node_count();
  cumulative_.resize(n);
  for (NodeId v = 0; v < n; ++v) {
    const auto nbrs = graph.neighbors(v);
    auto& cum = cumulative_[v];
    cum.reserve(nbrs.size());
    double running = 0.0;
    for (NodeId w : nbrs) {
      running += std::pow(static_cast<double>(graph.degrees()[w]), params.alpha);
      cum.push_back(running);
    }
  }
}

}  // namespace traffic
