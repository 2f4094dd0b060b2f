#include "traffic/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "traffic/rng.hpp"

namespace traffic {

namespace {

uint64_t edge_key(NodeId u, NodeId v) {
  if (u > v) std::swap(u, v);
  return (static_cast<uint64_t>(static_cast<uint32_t>(u)) << 32) | static_cast<uint32_t>(v);
}

}  // namespace

void BaParams::validate() const {
  if (m < 2) throw std::invalid_argument("ba: m must be >= 2");
  if (m > m0) throw std::invalid_argument("ba: m must not exceed m0");
  if (m0 >= n) throw std::invalid_argument("ba: n must exceed m0");
}

Graph Graph::from_edges(NodeId node_count,
                        const std::vector<std::pair<NodeId, NodeId>>& edges) {
  if (node_count <= 0) throw std::invalid_argument("graph: node_count must be positive");
  Graph g;
  g.adjacency_.resize(node_count);
  std::unordered_set<uint64_t> seen;
  seen.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= node_count || v >= node_count)
      throw std::invalid_argument("graph: edge endpoint out of range");
    if (u == v) throw std::invalid_argument("graph: self-loop");
    if (!seen.insert(edge_key(u, v)).second)
      throw std::invalid_argument("graph: duplicate edge");
    g.adjacency_[u].push_back(v);
    g.adjacency_[v].push_back(u);
  }
  for (auto& nbrs : g.adjacency_) std::sort(nbrs.begin(), nbrs.end());
  g.degrees_.resize(node_count);
  for (NodeId v = 0; v < node_count; ++v)
    g.degrees_[v] = static_cast<int32_t>(g.adjacency_[v].size());
  g.edge_count_ = static_cast<int64_t>(edges.size());
  return g;
}

int32_t Graph::degree(NodeId v) const {
  if (v < 0 || v >= node_count()) throw std::out_of_range("graph: node index out of range");
  return degrees_[v];
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  const auto& nbrs = adjacency_[u];
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

bool Graph::connected() const {
  const NodeId n = node_count();
  if (n == 0) return false;
  std::vector<char> visited(n, 0);
  std::vector<NodeId> stack{0};
  visited[0] = 1;
  NodeId count = 1;
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    for (NodeId w : adjacency_[u]) {
      if (!visited[w]) {
        visited[w] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n;
}

int32_t Graph::min_degree() const {
  return *std::min_element(degrees_.begin(), degrees_.end());
}

int32_t Graph::max_degree() const {
  return *std::max_element(degrees_.begin(), degrees_.end());
}

Graph generate_ba(const BaParams& params) {
  params.validate();
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(static_cast<size_t>(params.m0) * (params.m0 - 1) / 2 +
                static_cast<size_t>(params.n - params.m0) * params.m);

  // Pool of edge endpoints: drawing uniformly from it is exactly
  // degree-proportional selection.
  std::vector<NodeId> pool;
  pool.reserve(edges.capacity() * 2);

  for (NodeId v = 0; v < params.m0; ++v) {
    for (NodeId u = 0; u < v; ++u) {
      edges.emplace_back(u, v);
      pool.push_back(u);
      pool.push_back(v);
    }
  }

  SplitMix64 rng(params.seed);
  std::vector<NodeId> chosen;
  chosen.reserve(params.m);
  for (NodeId v = params.m0; v < params.n; ++v) {
    chosen.clear();
    // m distinct targets, degree-proportional w.r.t. the graph as it stood
    // before this node; repeated hits are rejected and redrawn.
    while (static_cast<NodeId>(chosen.size()) < params.m) {
      const NodeId target = pool[uniform_below(rng, pool.size())];
      if (std::find(chosen.begin(), chosen.end(), target) != chosen.end()) continue;
      chosen.push_back(target);
    }
    for (NodeId target : chosen) {
      edges.emplace_back(target, v);
      pool.push_back(target);
      pool.push_back(v);
    }
  }
  return Graph::from_edges(params.n, edges);
}

Graph load_edge_list(std::string_view text, std::ostream* warnings) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  NodeId max_node = -1;
  const char* p = text.data();
  const char* end = p + text.size();
  std::vector<long long> pending;
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\n' || *p == '\r')) ++p;
    if (p == end) break;
    long long value = 0;
    auto [next, ec] = std::from_chars(p, end, value);
    if (ec != std::errc() || next == p)
      throw std::invalid_argument("edge list: expected integer near '" +
                                  std::string(p, std::min<size_t>(8, end - p)) + "'");
    if (value < 0) throw std::invalid_argument("edge list: negative node index");
    p = next;
    pending.push_back(value);
    if (pending.size() == 2) {
      const auto u = static_cast<NodeId>(pending[0]);
      const auto v = static_cast<NodeId>(pending[1]);
      if (u == v) throw std::invalid_argument("edge list: self-loop " + std::to_string(u));
      edges.emplace_back(u, v);
      max_node = std::max({max_node, u, v});
      pending.clear();
    }
  }
  if (!pending.empty()) throw std::invalid_argument("edge list: odd number of endpoints");
  if (edges.empty()) throw std::invalid_argument("edge list: no edges");
  Graph g = Graph::from_edges(max_node + 1, edges);  // rejects dups and loops
  if (warnings && !g.connected()) *warnings << "warning: graph is not connected\n";
  return g;
}

std::string save_edge_list(const Graph& graph) {
  std::vector<std::string> lines;
  lines.reserve(graph.edge_count());
  for (NodeId u = 0; u < graph.node_count(); ++u) {
    for (NodeId v : graph.neighbors(u)) {
      if (u < v) lines.push_back(std::to_string(u) + " " + std::to_string(v));
    }
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& line : lines) {
    out += line;
    out += '\n';
  }
  return out;
}

Graph load_edge_list_file(const std::string& path, std::ostream* warnings) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_edge_list(buf.str(), warnings);
}

void save_edge_list_file(const Graph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << save_edge_list(graph);
}

}  // namespace traffic
