#include "traffic/capacity.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace traffic {

double CapacityAllocation::total() const {
  return std::accumulate(node_capacity.begin(), node_capacity.end(), 0.0);
}

CapacityAllocation allocate(const Graph& graph, double mean_capacity, double phi) {
  const NodeId n = graph.node_count();
  if (n == 0) throw std::invalid_argument("allocate: empty graph");
  if (!(mean_capacity > 0.0)) throw std::invalid_argument("allocate: mean capacity must be positive");
  if (!std::isfinite(phi)) throw std::invalid_argument("allocate: phi must be finite");

  // exp(phi*ln k - max) keeps the weights finite for any phi; degrees are
  // >= 1 on connected graphs so ln k is safe.
  std::vector<double> log_weight(n);
  for (NodeId v = 0; v < n; ++v) {
    const int32_t k = graph.degrees()[v];
    if (k <= 0) throw std::invalid_argument("allocate: isolated node");
    log_weight[v] = phi * std::log(static_cast<double>(k));
  }
  const double max_log = *std::max_element(log_weight.begin(), log_weight.end());

  CapacityAllocation alloc;
  alloc.phi = phi;
  alloc.mean_capacity = mean_capacity;
  alloc.node_capacity.resize(n);
  double sum = 0.0;
  for (NodeId v = 0; v < n; ++v) {
    alloc.node_capacity[v] = std::exp(log_weight[v] - max_log);
    sum += alloc.node_capacity[v];
  }
  for (NodeId v = 0; v < n; ++v)
    alloc.node_capacity[v] = mean_capacity * (static_cast<double>(n) * alloc.node_capacity[v] / sum);
  return alloc;
}

void write_allocation_csv(const CapacityAllocation& allocation, const Graph& graph,
                          std::ostream& out) {
  out << "node,degree,capacity\n";
  char buf[32];
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    std::snprintf(buf, sizeof buf, "%.6g", allocation.node_capacity[v]);
    out << v << ',' << graph.degrees()[v] << ',' << buf << '\n';
  }
}

}  // namespace traffic
