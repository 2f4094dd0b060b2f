#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "traffic/engine.hpp"
#include "traffic/graph.hpp"
#include "traffic/metrics.hpp"

namespace traffic {

struct GraphSpec {
  enum class Kind { kBa, kEdgeList };
  Kind kind = Kind::kBa;
  BaParams ba{};
  std::string edge_list_path;

  Graph build() const;
  Graph build(uint64_t seed_override) const;  // BA only
  std::string cache_key() const;
  std::string cache_key(uint64_t seed_override) const;
};

struct MeasurementParams {
  int64_t warmup = 5000;
  int64_t dt = 1000;
  int64_t max_steps = 7000;
  double eta_threshold = 0.01;
  int64_t snapshot_interval = 25;  // queue_evolution family only
};

// One experiment = one graph, one routing strategy, a set of figure
// families and the sweep axes they consume. Parsed from a JSON config file
// and echoed verbatim into the output manifest.
struct ExperimentSpec {
  GraphSpec graph;
  Strategy strategy = Strategy::kShortestPath;
  std::vector<std::string> families;
  std::vector<double> phi_axis;
  std::vector<double> alpha_axis;      // local strategy only
  std::vector<double> capacity_axis;   // <C>
  std::vector<int64_t> r_axis;         // eta_curve / queue_evolution
  std::vector<uint64_t> graph_seeds;   // betweenness family
  int seeds_per_point = 5;
  MeasurementParams measurement;
  RcSearchParams rc_search;  // n_seeds / eta_threshold filled from the above
  PhiOptParams phi_opt;
  uint64_t master_seed = 1;
  std::string out_dir = "out";
};

extern const std::vector<std::string> kKnownFamilies;

ExperimentSpec parse_spec(const std::string& json_text);
ExperimentSpec load_spec_file(const std::string& path);
std::string spec_to_json(const ExperimentSpec& spec);  // canonical, round-trips

// Collects every violation instead of stopping at the first.
std::vector<std::string> validate_spec(const ExperimentSpec& spec);

// Cache of computed sweep cells, one JSON file per cell, written atomically
// (temp + rename). A cell is only reused when its stored key matches, so a
// stale or foreign file is recomputed, never trusted.
class CellStore {
 public:
  explicit CellStore(std::filesystem::path dir);

  std::optional<std::string> load(const std::string& key) const;  // payload JSON text
  void store(const std::string& key, const std::string& payload_json) const;
  std::filesystem::path path_for(const std::string& key) const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct EtaPoint {
  double phi = 0, capacity = 0, alpha = 0;
  int64_t rate = 0;
  double eta_mean = 0;
  std::vector<double> per_seed;
  std::vector<uint64_t> seeds;
};

struct RcPoint {
  double phi = 0, capacity = 0, alpha = 0;
  CriticalRate rc;
};

struct BcRecord {
  uint64_t graph_seed = 0;
  double mu = 0;
  PowerLawFit fit;
  std::vector<BcBin> bins;
};

struct QueuePoint {
  double phi = 0, capacity = 0, alpha = 0;
  int64_t rate = 0;
  uint64_t seed = 0;
  double eta = 0;
  std::vector<DegreeClassTotals> snapshots;
  std::vector<int64_t> n_packets;
};

struct PhiOptPoint {
  double capacity = 0, alpha = 0;
  PhiOptResult result;
};

struct SweepResult {
  std::vector<EtaPoint> eta_points;
  std::vector<RcPoint> rc_points;
  std::vector<BcRecord> bc_records;
  std::vector<QueuePoint> queue_points;
  std::vector<PhiOptPoint> phi_opt_points;
};

// Computes sweep cells against the cache, batches of points in parallel.
// Shared by the sweep driver and the acceptance suite.
class Evaluator {
 public:
  Evaluator(const ExperimentSpec& spec, const CellStore* cells, int workers);

  const Graph& base_graph() const { return *base_graph_; }

  EtaPoint eta_point(double phi, double capacity, double alpha, int64_t rate) const;
  std::vector<EtaPoint> eta_batch(
      const std::vector<std::tuple<double, double, double, int64_t>>& points) const;

  RcPoint rc_point(double phi, double capacity, double alpha) const;
  std::vector<RcPoint> rc_batch(
      const std::vector<std::tuple<double, double, double>>& points) const;

  PhiOptPoint phi_opt_point(double capacity, double alpha) const;
  PhiOptPoint phi_opt_point(double capacity, double alpha, const PhiOptParams& params) const;

  BcRecord bc_record(uint64_t graph_seed) const;
  std::vector<BcRecord> bc_batch(const std::vector<uint64_t>& graph_seeds) const;

  QueuePoint queue_point(double phi, double capacity, double alpha, int64_t rate) const;
  std::vector<QueuePoint> queue_batch(
      const std::vector<std::tuple<double, double, double, int64_t>>& points) const;

  SimConfig base_config(double phi, double capacity, double alpha) const;

 private:
  ExperimentSpec spec_;
  const CellStore* cells_;  // may be null: compute everything fresh
  int workers_;
  std::shared_ptr<Graph> base_graph_;
};

// Runs every family in the spec, writes per-family CSVs plus manifest.json
// under spec.out_dir, and returns the computed records. Cell files under
// <out>/cells are the unit of crash resume: existing cells are loaded, only
// missing ones are computed. On failure a FAILED marker file is left next
// to whatever completed.
SweepResult run_experiment(const ExperimentSpec& spec, int workers);

// Runs `fn(i)` for i in [0, n) on up to `workers` threads. Rethrows the
// first exception after all threads join.
void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn);

// "%.6g" — the format every CSV float goes through.
std::string fmt6(double value);

}  // namespace traffic
