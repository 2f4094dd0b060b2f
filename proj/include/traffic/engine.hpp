#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "traffic/capacity.hpp"
#include "traffic/graph.hpp"
#include "traffic/routing.hpp"

namespace traffic {

enum class Strategy { kShortestPath, kLocal };

// Validation knob only: results must not depend on the order nodes are
// processed in, and a test asserts they do not.
enum class ProcessingOrder { kForward, kReverse };

struct Packet {
  uint64_t id = 0;  // monotone within a run
  NodeId source = 0;
  NodeId dest = 0;  // always != source
  int32_t birth_step = 0;
  int32_t hops = 0;  // forwards so far
};

struct SimConfig {
  Strategy strategy = Strategy::kShortestPath;
  int64_t packets_per_step = 1;  // R
  double phi = 0.0;
  double mean_capacity = 1.0;  // <C>
  double alpha = 0.0;          // local routing only
  int64_t warmup_steps = 5000;
  int64_t window = 1000;  // dt used by the order-parameter estimate
  int64_t max_steps = 7000;
  int64_t snapshot_interval = 0;  // per-degree queue totals; 0 disables
  uint64_t seed = 0;
  ProcessingOrder order = ProcessingOrder::kForward;
  bool log_deliveries = false;

  void validate() const;  // throws std::invalid_argument
};

struct DegreeClassTotals {
  int64_t step = 0;
  // (degree, total packets queued on nodes of that degree), every degree
  // value present in the graph.
  std::vector<std::pair<int32_t, int64_t>> totals;
};

struct DeliveryEvent {
  uint64_t id = 0;
  NodeId source = 0;
  NodeId dest = 0;
  int32_t hops = 0;
  int64_t step = 0;
};

struct RunRecord {
  std::vector<int64_t> n_packets;  // N_p after each step
  std::vector<int64_t> generated_cum;
  std::vector<int64_t> delivered_cum;
  std::vector<DegreeClassTotals> snapshots;
  std::vector<DeliveryEvent> deliveries;  // only when log_deliveries
};

void write_run_csv(const RunRecord& record, std::ostream& out);
void write_snapshot_csv(const RunRecord& record, std::ostream& out);

// Discrete-time traffic dynamics. Each step: R packets are generated with
// uniform random sources and destinations (dest != source) and join their
// source's queue tail; then every node forwards up to step_quota(C_i)
// packets from its queue head. A packet whose next hop is its destination
// is delivered and removed; every other forwarded packet lands on the
// recipient's tail and may not move again until the next step (synchronous
// snapshot rule). Queues are unbounded FIFO.
//
// All per-step randomness (quotas, local routing draws) is derived by
// counter-based hashing from the run seed, so trajectories are independent
// of node processing order and identical runs are byte-identical.
class Simulation {
 public:
  Simulation(const Graph& graph, const SimConfig& config);
  ~Simulation();

  void step();
  void run_to_end();  // advances to config.max_steps

  int64_t clock() const { return clock_; }
  int64_t n_packets() const { return generated_ - delivered_; }
  int64_t generated() const { return generated_; }
  int64_t delivered() const { return delivered_; }
  const std::deque<Packet>& queue(NodeId v) const { return queues_[v]; }
  const CapacityAllocation& allocation() const { return allocation_; }
  const ShortestPathTable* table() const { return table_.get(); }
  const RunRecord& record() const { return record_; }
  RunRecord take_record() { return std::move(record_); }

  // The quota node `v` draws at step `t` for a run with this seed; exposed
  // so tests can recompute what the engine used.
  static int64_t quota_at(uint64_t run_seed, int64_t t, NodeId v, double capacity);

 private:
  void deliver_from(NodeId v, int64_t t);
  NodeId route(NodeId current, const Packet& p) const;
  void take_snapshot(int64_t t);

  const Graph* graph_;
  SimConfig config_;
  CapacityAllocation allocation_;
  std::unique_ptr<ShortestPathTable> table_;  // shortest-path strategy
  std::optional<LocalRouter> local_;          // local strategy

  uint64_t quota_seed_, route_seed_;
  SplitMix64 gen_rng_;  // sequential stream for packet generation

  std::vector<std::deque<Packet>> queues_;
  std::vector<std::vector<Packet>> inbox_;
  std::vector<NodeId> touched_;        // recipients with pending inbox packets
  std::vector<int32_t> class_degrees_;  // distinct degree values, sorted
  std::vector<int32_t> degree_slot_;    // degree -> index into class_degrees_

  int64_t clock_ = 0;
  uint64_t next_packet_id_ = 0;
  int64_t generated_ = 0;
  int64_t delivered_ = 0;
  RunRecord record_;
};

RunRecord run(const Graph& graph, const SimConfig& config);

}  // namespace traffic
