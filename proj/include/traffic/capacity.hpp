#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "traffic/graph.hpp"
#include "traffic/rng.hpp"

namespace traffic {

// Per-node packet-delivering budget. The network-wide total N*<C> is fixed
// and split across nodes proportionally to degree^phi; phi = 0 gives every
// node exactly <C>.
struct CapacityAllocation {
  std::vector<double> node_capacity;  // C_i, packets per time step
  double phi = 0.0;
  double mean_capacity = 0.0;  // <C>

  double total() const;
};

// Splits the budget N*mean_capacity as C_i = N<C> k_i^phi / sum_j k_j^phi.
// Weights are computed in log space so extreme phi cannot overflow.
// Requires mean_capacity > 0 and a nonempty graph.
CapacityAllocation allocate(const Graph& graph, double mean_capacity, double phi);

// Integer packets a node may forward this step: floor(C_i) plus one more
// with probability frac(C_i), drawn fresh each step. Expectation is C_i.
template <class Rng>
int64_t step_quota(double capacity, Rng& rng) {
  const double base = std::floor(capacity);
  const double frac = capacity - base;
  auto quota = static_cast<int64_t>(base);
  if (frac > 0.0 && uniform01(rng) < frac) ++quota;
  return quota;
}

// Audit dump, one row per node: node,degree,capacity.
void write_allocation_csv(const CapacityAllocation& allocation, const Graph& graph,
                          std::ostream& out);

}  // namespace traffic
