#include "traffic/engine.hpp"

#include <algorithm>
#include <cassert>
#include <ostream>
#include <stdexcept>

namespace traffic {

namespace {

// Stream tags for deriving independent seeds from the run seed.
constexpr uint64_t kGenTag = 0x67656e;      // packet generation
constexpr uint64_t kQuotaTag = 0x71756f74;  // per-step delivery quotas
constexpr uint64_t kRouteTag = 0x726f7574;  // local-routing draws
constexpr uint64_t kTieTag = 0x746965;      // shortest-path tie breaking

int64_t quota_from(uint64_t quota_seed, int64_t t, NodeId v, double capacity) {
  SplitMix64 rng(combine(combine(quota_seed, static_cast<uint64_t>(t)),
                         static_cast<uint64_t>(static_cast<uint32_t>(v))));
  return step_quota(capacity, rng);
}

}  // namespace

void SimConfig::validate() const {
  if (packets_per_step < 0) throw std::invalid_argument("sim: R must be >= 0");
  if (!(mean_capacity > 0.0)) throw std::invalid_argument("sim: mean capacity must be positive");
  if (warmup_steps < 0) throw std::invalid_argument("sim: warmup must be >= 0");
  if (window < 1) throw std::invalid_argument("sim: window must be >= 1");
  if (warmup_steps + window > max_steps)
    throw std::invalid_argument("sim: warmup + window exceeds max_steps");
  if (snapshot_interval < 0) throw std::invalid_argument("sim: snapshot interval must be >= 0");
}

Simulation::Simulation(const Graph& graph, const SimConfig& config)
    : graph_(&graph),
      config_(config),
      allocation_(allocate(graph, config.mean_capacity, config.phi)),
      quota_seed_(combine(config.seed, kQuotaTag)),
      route_seed_(combine(config.seed, kRouteTag)),
      gen_rng_(combine(config.seed, kGenTag)) {
  config_.validate();
  if (!graph.connected()) throw std::invalid_argument("sim: graph must be connected");
  if (config.strategy == Strategy::kShortestPath) {
    table_ = std::make_unique<ShortestPathTable>(graph, combine(config.seed, kTieTag));
  } else {
    local_.emplace(graph, LocalRoutingParams{config.alpha});
  }

  const NodeId n = graph.node_count();
  queues_.resize(n);
  inbox_.resize(n);

  class_degrees_ = graph.degrees();
  std::sort(class_degrees_.begin(), class_degrees_.end());
  class_degrees_.erase(std::unique(class_degrees_.begin(), class_degrees_.end()),
                       class_degrees_.end());
  degree_slot_.assign(graph.max_degree() + 1, -1);
  for (size_t i = 0; i < class_degrees_.size(); ++i)
    degree_slot_[class_degrees_[i]] = static_cast<int32_t>(i);
}

Simulation::~Simulation() = default;

int64_t Simulation::quota_at(uint64_t run_seed, int64_t t, NodeId v, double capacity) {
  return quota_from(combine(run_seed, kQuotaTag), t, v, capacity);
}

NodeId Simulation::route(NodeId current, const Packet& p) const {
  if (table_) return table_->next_hop_unchecked(current, p.dest);
  SplitMix64 rng(combine(combine(route_seed_, p.id),
                         static_cast<uint64_t>(static_cast<uint32_t>(p.hops))));
  return local_->next_hop(current, p.dest, rng);
}

void Simulation::deliver_from(NodeId v, int64_t t) {
  auto& queue = queues_[v];
  if (queue.empty()) return;
  const int64_t quota = quota_from(quota_seed_, t, v, allocation_.node_capacity[v]);
  int64_t serve = std::min<int64_t>(quota, static_cast<int64_t>(queue.size()));
  for (; serve > 0; --serve) {
    Packet p = queue.front();
    queue.pop_front();
    const NodeId next = route(v, p);
    ++p.hops;
    if (next == p.dest) {
      ++delivered_;
      if (config_.log_deliveries)
        record_.deliveries.push_back({p.id, p.source, p.dest, p.hops, t});
    } else {
      if (inbox_[next].empty()) touched_.push_back(next);
      inbox_[next].push_back(p);
    }
  }
}

void Simulation::step() {
  const int64_t t = clock_;
  const NodeId n = graph_->node_count();

  // Generation: R packets, uniform source, uniform dest != source. New
  // packets join the source's tail and may be forwarded this same step if
  // they reach the head.
  for (int64_t i = 0; i < config_.packets_per_step; ++i) {
    const auto source = static_cast<NodeId>(uniform_below(gen_rng_, static_cast<uint64_t>(n)));
    auto dest = static_cast<NodeId>(uniform_below(gen_rng_, static_cast<uint64_t>(n - 1)));
    if (dest >= source) ++dest;
    queues_[source].push_back(Packet{next_packet_id_++, source, dest, static_cast<int32_t>(t), 0});
  }
  generated_ += config_.packets_per_step;

  // Delivery. Forwarded packets are staged in per-recipient inboxes and
  // merged after every node has been served, so nothing moves twice in one
  // step. Inboxes are appended in packet-id order, which makes the merged
  // queues independent of the node processing order.
  if (config_.order == ProcessingOrder::kForward) {
    for (NodeId v = 0; v < n; ++v) deliver_from(v, t);
  } else {
    for (NodeId v = n - 1; v >= 0; --v) deliver_from(v, t);
  }
  for (NodeId v : touched_) {
    auto& in = inbox_[v];
    std::sort(in.begin(), in.end(), [](const Packet& a, const Packet& b) { return a.id < b.id; });
    for (const Packet& p : in) queues_[v].push_back(p);
    in.clear();
  }
  touched_.clear();

  clock_ = t + 1;
  record_.n_packets.push_back(n_packets());
  record_.generated_cum.push_back(generated_);
  record_.delivered_cum.push_back(delivered_);
  if (config_.snapshot_interval > 0 && t % config_.snapshot_interval == 0) take_snapshot(t);
}

void Simulation::take_snapshot(int64_t t) {
  DegreeClassTotals snap;
  snap.step = t;
  std::vector<int64_t> totals(class_degrees_.size(), 0);
  for (NodeId v = 0; v < graph_->node_count(); ++v)
    totals[degree_slot_[graph_->degrees()[v]]] += static_cast<int64_t>(queues_[v].size());
  snap.totals.reserve(totals.size());
  for (size_t i = 0; i < totals.size(); ++i)
    snap.totals.emplace_back(class_degrees_[i], totals[i]);
  record_.snapshots.push_back(std::move(snap));
}

void Simulation::run_to_end() {
  while (clock_ < config_.max_steps) step();
}

RunRecord run(const Graph& graph, const SimConfig& config) {
  Simulation sim(graph, config);
  sim.run_to_end();
  return sim.take_record();
}

void write_run_csv(const RunRecord& record, std::ostream& out) {
  out << "step,n_packets,delivered_cum,generated_cum\n";
  for (size_t t = 0; t < record.n_packets.size(); ++t) {
    out << t << ',' << record.n_packets[t] << ',' << record.delivered_cum[t] << ','
        << record.generated_cum[t] << '\n';
  }
}

void write_snapshot_csv(const RunRecord& record, std::ostream& out) {
  out << "step,degree,queue_total\n";
  for (const auto& snap : record.snapshots) {
    for (auto [degree, total] : snap.totals)
      out << snap.step << ',' << degree << ',' << total << '\n';
  }
}

}  // namespace traffic
