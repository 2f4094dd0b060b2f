#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace traffic {

using NodeId = int32_t;

// Parameters of the preferential-attachment construction: a fully connected
// seed of m0 nodes, then one node per growth step attaching m edges to
// existing nodes with probability proportional to their current degree.
struct BaParams {
  NodeId n = 0;       // total number of nodes
  NodeId m0 = 0;      // seed clique size
  NodeId m = 0;       // edges per new node, m <= m0
  uint64_t seed = 0;  // RNG seed; same seed reproduces the same graph

  // Throws std::invalid_argument unless 2 <= m <= m0 < n.
  void validate() const;
};

// Simple undirected graph, immutable once built. Adjacency lists are sorted,
// degrees are cached. Node ids are insertion order for generated graphs
// (seed nodes 0..m0-1), which is what the age-vs-degree statistics rely on.
class Graph {
 public:
  // Builds from an explicit edge list; rejects self-loops, duplicate edges
  // and endpoints outside [0, node_count).
  static Graph from_edges(NodeId node_count,
                          const std::vector<std::pair<NodeId, NodeId>>& edges);

  NodeId node_count() const { return static_cast<NodeId>(adjacency_.size()); }
  int64_t edge_count() const { return edge_count_; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {adjacency_[v].data(), adjacency_[v].size()};
  }

  // Checked accessor; throws std::out_of_range on a bad index.
  int32_t degree(NodeId v) const;

  const std::vector<int32_t>& degrees() const { return degrees_; }

  bool has_edge(NodeId u, NodeId v) const;  // binary search on sorted adjacency
  bool connected() const;
  int32_t min_degree() const;
  int32_t max_degree() const;

 private:
  Graph() = default;

  std::vector<std::vector<NodeId>> adjacency_;
  std::vector<int32_t> degrees_;
  int64_t edge_count_ = 0;
};

Graph generate_ba(const BaParams& params);

// Edge-list text format: one edge per line, "u v" with u < v, lines sorted
// lexicographically. save_edge_list emits the canonical form; load accepts
// any whitespace-separated pair list. Parse failures, self-loops and
// duplicate edges throw std::invalid_argument; a disconnected graph is only
// reported to `warnings` (when given), not an error.
Graph load_edge_list(std::string_view text, std::ostream* warnings = nullptr);
std::string save_edge_list(const Graph& graph);

Graph load_edge_list_file(const std::string& path, std::ostream* warnings = nullptr);
void save_edge_list_file(const Graph& graph, const std::string& path);

}  // namespace traffic
