#include "traffic/sweep.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace traffic {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt6(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

namespace {

std::string fmt17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

uint64_t hash_bytes(std::string_view text) {
  uint64_t h = 0x243f6a8885a308d3ull;
  for (unsigned char c : text) h = combine(h, static_cast<uint64_t>(c));
  return h;
}

std::string hex16(uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

void write_file_atomic(const fs::path& target, const std::string& content) {
  static std::atomic<uint64_t> counter{0};
  const auto tag = std::to_string(::getpid()) + "." + std::to_string(counter.fetch_add(1));
  const fs::path tmp = target.string() + ".tmp." + tag;
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<double> sorted_unique(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

std::vector<int64_t> sorted_unique(std::vector<int64_t> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

std::vector<uint64_t> sorted_unique(std::vector<uint64_t> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

const char* strategy_name(Strategy s) {
  return s == Strategy::kShortestPath ? "shortest_path" : "local";
}

}  // namespace

const std::vector<std::string> kKnownFamilies = {
    "eta_curve", "rc_curve", "betweenness", "queue_evolution", "phi_opt", "max_rc"};

// ---------------------------------------------------------------------------
// GraphSpec

Graph GraphSpec::build() const {
  if (kind == Kind::kBa) return generate_ba(ba);
  return load_edge_list_file(edge_list_path);
}

Graph GraphSpec::build(uint64_t seed_override) const {
  if (kind == Kind::kBa) {
    BaParams p = ba;
    p.seed = seed_override;
    return generate_ba(p);
  }
  return load_edge_list_file(edge_list_path);
}

std::string GraphSpec::cache_key() const { return cache_key(ba.seed); }

std::string GraphSpec::cache_key(uint64_t seed_override) const {
  if (kind == Kind::kBa) {
    return "ba:" + std::to_string(ba.n) + ":" + std::to_string(ba.m0) + ":" +
           std::to_string(ba.m) + ":" + std::to_string(seed_override);
  }
  return "el:" + hex16(hash_bytes(read_file(edge_list_path)));
}

// ---------------------------------------------------------------------------
// Spec parsing / serialization / validation

ExperimentSpec parse_spec(const std::string& json_text) {
  json j = json::parse(json_text);
  ExperimentSpec spec;

  if (j.contains("graph")) {
    const auto& g = j["graph"];
    const std::string type = g.value("type", "ba");
    if (type == "ba") {
      spec.graph.kind = GraphSpec::Kind::kBa;
      spec.graph.ba.n = g.value("n", 0);
      spec.graph.ba.m0 = g.value("m0", 0);
      spec.graph.ba.m = g.value("m", 0);
      spec.graph.ba.seed = g.value("seed", 0ull);
    } else if (type == "edge_list") {
      spec.graph.kind = GraphSpec::Kind::kEdgeList;
      spec.graph.edge_list_path = g.value("path", "");
    } else {
      throw std::invalid_argument("config: unknown graph.type '" + type + "'");
    }
  }

  const std::string strat = j.value("strategy", "shortest_path");
  if (strat == "shortest_path") {
    spec.strategy = Strategy::kShortestPath;
  } else if (strat == "local") {
    spec.strategy = Strategy::kLocal;
  } else {
    throw std::invalid_argument("config: unknown strategy '" + strat + "'");
  }

  spec.families = j.value("families", std::vector<std::string>{});
  spec.phi_axis = j.value("phi", std::vector<double>{});
  spec.alpha_axis = j.value("alpha", std::vector<double>{});
  spec.capacity_axis = j.value("mean_capacity", std::vector<double>{});
  spec.r_axis = j.value("R", std::vector<int64_t>{});
  spec.graph_seeds = j.value("graph_seeds", std::vector<uint64_t>{});
  spec.seeds_per_point = j.value("seeds_per_point", 5);

  if (j.contains("measurement")) {
    const auto& m = j["measurement"];
    spec.measurement.warmup = m.value("warmup", spec.measurement.warmup);
    spec.measurement.dt = m.value("dt", spec.measurement.dt);
    spec.measurement.max_steps = m.value("max_steps", spec.measurement.max_steps);
    spec.measurement.eta_threshold = m.value("eta_threshold", spec.measurement.eta_threshold);
    spec.measurement.snapshot_interval =
        m.value("snapshot_interval", spec.measurement.snapshot_interval);
  }
  if (j.contains("rc_search")) {
    const auto& r = j["rc_search"];
    spec.rc_search.r_lo = r.value("r_lo", spec.rc_search.r_lo);
    spec.rc_search.r_hi = r.value("r_hi", spec.rc_search.r_hi);
  }
  if (j.contains("phi_opt")) {
    const auto& p = j["phi_opt"];
    spec.phi_opt.phi_lo = p.value("phi_lo", spec.phi_opt.phi_lo);
    spec.phi_opt.phi_hi = p.value("phi_hi", spec.phi_opt.phi_hi);
    spec.phi_opt.coarse_step = p.value("coarse_step", spec.phi_opt.coarse_step);
    spec.phi_opt.fine_step = p.value("fine_step", spec.phi_opt.fine_step);
    spec.phi_opt.refine_halfwidth = p.value("refine_halfwidth", spec.phi_opt.refine_halfwidth);
    spec.phi_opt.refine = p.value("refine", spec.phi_opt.refine);
  }
  spec.master_seed = j.value("master_seed", 1ull);
  spec.out_dir = j.value("out", "out");
  return spec;
}

ExperimentSpec load_spec_file(const std::string& path) {
  return parse_spec(read_file(path));
}

std::string spec_to_json(const ExperimentSpec& spec) {
  json j;
  if (spec.graph.kind == GraphSpec::Kind::kBa) {
    j["graph"] = {{"type", "ba"},
                  {"n", spec.graph.ba.n},
                  {"m0", spec.graph.ba.m0},
                  {"m", spec.graph.ba.m},
                  {"seed", spec.graph.ba.seed}};
  } else {
    j["graph"] = {{"type", "edge_list"}, {"path", spec.graph.edge_list_path}};
  }
  j["strategy"] = strategy_name(spec.strategy);
  j["families"] = spec.families;
  j["phi"] = spec.phi_axis;
  j["alpha"] = spec.alpha_axis;
  j["mean_capacity"] = spec.capacity_axis;
  j["R"] = spec.r_axis;
  j["graph_seeds"] = spec.graph_seeds;
  j["seeds_per_point"] = spec.seeds_per_point;
  j["measurement"] = {{"warmup", spec.measurement.warmup},
                      {"dt", spec.measurement.dt},
                      {"max_steps", spec.measurement.max_steps},
                      {"eta_threshold", spec.measurement.eta_threshold},
                      {"snapshot_interval", spec.measurement.snapshot_interval}};
  j["rc_search"] = {{"r_lo", spec.rc_search.r_lo}, {"r_hi", spec.rc_search.r_hi}};
  j["phi_opt"] = {{"phi_lo", spec.phi_opt.phi_lo},
                  {"phi_hi", spec.phi_opt.phi_hi},
                  {"coarse_step", spec.phi_opt.coarse_step},
                  {"fine_step", spec.phi_opt.fine_step},
                  {"refine_halfwidth", spec.phi_opt.refine_halfwidth},
                  {"refine", spec.phi_opt.refine}};
  j["master_seed"] = spec.master_seed;
  j["out"] = spec.out_dir;
  return j.dump(1);
}

std::vector<std::string> validate_spec(const ExperimentSpec& spec) {
  std::vector<std::string> issues;
  auto need = [&](bool ok, const std::string& message) {
    if (!ok) issues.push_back(message);
  };

  if (spec.graph.kind == GraphSpec::Kind::kBa) {
    need(spec.graph.ba.m >= 2, "graph.m: must be >= 2");
    need(spec.graph.ba.m <= spec.graph.ba.m0, "graph.m: must not exceed graph.m0");
    need(spec.graph.ba.m0 < spec.graph.ba.n, "graph.n: must exceed graph.m0");
  } else {
    need(!spec.graph.edge_list_path.empty(), "graph.path: missing edge list path");
    need(spec.graph.edge_list_path.empty() || fs::exists(spec.graph.edge_list_path),
         "graph.path: file does not exist: " + spec.graph.edge_list_path);
  }

  need(!spec.families.empty(), "families: at least one figure family required");
  for (const auto& family : spec.families) {
    need(std::find(kKnownFamilies.begin(), kKnownFamilies.end(), family) != kKnownFamilies.end(),
         "families: unknown family '" + family + "'");
  }
  auto has = [&](const char* family) {
    return std::find(spec.families.begin(), spec.families.end(), family) != spec.families.end();
  };

  const bool traffic_families =
      has("eta_curve") || has("rc_curve") || has("queue_evolution") || has("phi_opt") ||
      has("max_rc");
  if (traffic_families) {
    need(!spec.capacity_axis.empty(), "mean_capacity: sweep axis is empty");
    for (double c : spec.capacity_axis)
      need(c > 0, "mean_capacity: values must be positive");
    if (spec.strategy == Strategy::kLocal)
      need(!spec.alpha_axis.empty(), "alpha: sweep axis is empty (local strategy)");
  }
  if (has("eta_curve") || has("rc_curve") || has("queue_evolution"))
    need(!spec.phi_axis.empty(), "phi: sweep axis is empty");
  if (has("eta_curve") || has("queue_evolution")) {
    need(!spec.r_axis.empty(), "R: sweep axis is empty");
    for (int64_t r : spec.r_axis) need(r >= 1, "R: values must be >= 1");
  }
  if (has("betweenness") && spec.graph.kind == GraphSpec::Kind::kBa)
    need(!spec.graph_seeds.empty(), "graph_seeds: required by the betweenness family");
  if (has("queue_evolution"))
    need(spec.measurement.snapshot_interval >= 1,
         "measurement.snapshot_interval: must be >= 1 for queue_evolution");

  need(spec.seeds_per_point >= 1, "seeds_per_point: must be >= 1");
  need(spec.measurement.warmup >= 0, "measurement.warmup: must be >= 0");
  need(spec.measurement.dt >= 1, "measurement.dt: must be >= 1");
  need(spec.measurement.warmup <= spec.measurement.max_steps,
       "measurement.warmup: exceeds measurement.max_steps");
  need(spec.measurement.warmup + 2 * spec.measurement.dt <= spec.measurement.max_steps,
       "measurement.max_steps: must be >= warmup + 2*dt");
  need(spec.measurement.eta_threshold > 0, "measurement.eta_threshold: must be positive");
  need(spec.rc_search.r_lo >= 0, "rc_search.r_lo: must be >= 0");
  need(spec.rc_search.r_hi > spec.rc_search.r_lo, "rc_search.r_hi: must exceed r_lo");
  if (has("phi_opt") || has("max_rc")) {
    need(spec.phi_opt.phi_hi > spec.phi_opt.phi_lo, "phi_opt.phi_hi: must exceed phi_lo");
    need(spec.phi_opt.coarse_step > 0, "phi_opt.coarse_step: must be positive");
    need(spec.phi_opt.fine_step > 0, "phi_opt.fine_step: must be positive");
  }
  need(!spec.out_dir.empty(), "out: output directory required");
  return issues;
}

// ---------------------------------------------------------------------------
// Parallel helper

void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
  if (n == 0) return;
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (count == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(count);
  for (int i = 0; i < count; ++i) threads.emplace_back(body);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// CellStore

CellStore::CellStore(fs::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) fs::create_directories(dir_);
}

fs::path CellStore::path_for(const std::string& key) const {
  const auto family = key.substr(0, key.find('|'));
  return dir_ / (family + "-" + hex16(hash_bytes(key)) + ".json");
}

std::optional<std::string> CellStore::load(const std::string& key) const {
  if (dir_.empty()) return std::nullopt;
  const fs::path path = path_for(key);
  if (!fs::exists(path)) return std::nullopt;
  try {
    json j = json::parse(read_file(path));
    if (j.value("key", "") != key) return std::nullopt;  // stale or foreign cell
    return j.at("payload").dump();
  } catch (...) {
    return std::nullopt;  // unreadable cell: recompute and overwrite
  }
}

void CellStore::store(const std::string& key, const std::string& payload_json) const {
  if (dir_.empty()) return;
  json j;
  j["key"] = key;
  j["payload"] = json::parse(payload_json);
  write_file_atomic(path_for(key), j.dump(1));
}

// ---------------------------------------------------------------------------
// Evaluator

Evaluator::Evaluator(const ExperimentSpec& spec, const CellStore* cells, int workers)
    : spec_(spec), cells_(cells), workers_(std::max(1, workers)) {
  base_graph_ = std::make_shared<Graph>(spec_.graph.build());
}

SimConfig Evaluator::base_config(double phi, double capacity, double alpha) const {
  SimConfig config;
  config.strategy = spec_.strategy;
  config.phi = phi;
  config.mean_capacity = capacity;
  config.alpha = alpha;
  config.warmup_steps = spec_.measurement.warmup;
  config.window = spec_.measurement.dt;
  config.max_steps = spec_.measurement.max_steps;
  config.snapshot_interval = 0;
  return config;
}

namespace {

std::string measurement_key(const MeasurementParams& m) {
  return "warmup=" + std::to_string(m.warmup) + ",dt=" + std::to_string(m.dt) +
         ",max=" + std::to_string(m.max_steps);
}

json fit_to_json(const PowerLawFit& fit) {
  return {{"exponent", fit.exponent}, {"log_prefactor", fit.log_prefactor},
          {"rms_residual", fit.rms_residual}, {"k_lo", fit.k_lo},
          {"k_hi", fit.k_hi},           {"n_bins", fit.n_bins}};
}

PowerLawFit fit_from_json(const json& j) {
  PowerLawFit fit;
  fit.exponent = j.at("exponent");
  fit.log_prefactor = j.at("log_prefactor");
  fit.rms_residual = j.at("rms_residual");
  fit.k_lo = j.at("k_lo");
  fit.k_hi = j.at("k_hi");
  fit.n_bins = j.at("n_bins");
  return fit;
}

}  // namespace

EtaPoint Evaluator::eta_point(double phi, double capacity, double alpha, int64_t rate) const {
  const std::string key = "eta|g=" + spec_.graph.cache_key() + "|s=" +
                          strategy_name(spec_.strategy) + "|phi=" + fmt17(phi) +
                          "|C=" + fmt17(capacity) + "|alpha=" + fmt17(alpha) +
                          "|R=" + std::to_string(rate) +
                          "|reps=" + std::to_string(spec_.seeds_per_point) + "|" +
                          measurement_key(spec_.measurement) +
                          "|master=" + std::to_string(spec_.master_seed);
  EtaPoint point;
  point.phi = phi;
  point.capacity = capacity;
  point.alpha = alpha;
  point.rate = rate;
  for (int rep = 0; rep < spec_.seeds_per_point; ++rep)
    point.seeds.push_back(derive_run_seed(spec_.master_seed, phi, rate, alpha, rep));

  if (cells_) {
    if (auto cached = cells_->load(key)) {
      json j = json::parse(*cached);
      point.eta_mean = j.at("eta_mean");
      point.per_seed = j.at("per_seed").get<std::vector<double>>();
      return point;
    }
  }

  point.eta_mean = run_mean_eta(*base_graph_, base_config(phi, capacity, alpha), rate,
                                spec_.master_seed, spec_.seeds_per_point, &point.per_seed);
  if (cells_) {
    json payload = {{"phi", phi},           {"capacity", capacity}, {"alpha", alpha},
                    {"R", rate},            {"eta_mean", point.eta_mean},
                    {"per_seed", point.per_seed}, {"seeds", point.seeds}};
    cells_->store(key, payload.dump());
  }
  return point;
}

std::vector<EtaPoint> Evaluator::eta_batch(
    const std::vector<std::tuple<double, double, double, int64_t>>& points) const {
  std::vector<EtaPoint> result(points.size());
  parallel_for(points.size(), workers_, [&](size_t i) {
    const auto& [phi, c, alpha, rate] = points[i];
    result[i] = eta_point(phi, c, alpha, rate);
  });
  return result;
}

RcPoint Evaluator::rc_point(double phi, double capacity, double alpha) const {
  RcSearchParams params = spec_.rc_search;
  params.eta_threshold = spec_.measurement.eta_threshold;
  params.n_seeds = spec_.seeds_per_point;

  const std::string key = "rc|g=" + spec_.graph.cache_key() + "|s=" +
                          strategy_name(spec_.strategy) + "|phi=" + fmt17(phi) +
                          "|C=" + fmt17(capacity) + "|alpha=" + fmt17(alpha) +
                          "|reps=" + std::to_string(params.n_seeds) +
                          "|thr=" + fmt17(params.eta_threshold) +
                          "|rlo=" + std::to_string(params.r_lo) +
                          "|rhi=" + std::to_string(params.r_hi) + "|" +
                          measurement_key(spec_.measurement) +
                          "|master=" + std::to_string(spec_.master_seed);

  RcPoint point;
  point.phi = phi;
  point.capacity = capacity;
  point.alpha = alpha;

  if (cells_) {
    if (auto cached = cells_->load(key)) {
      json j = json::parse(*cached);
      point.rc.rc = j.at("rc");
      point.rc.threshold = j.at("threshold");
      point.rc.eta_below = j.at("eta_below");
      point.rc.eta_at = j.at("eta_at");
      for (const auto& e : j.at("evaluations"))
        point.rc.evaluations.emplace_back(e.at(0).get<int64_t>(), e.at(1).get<double>());
      return point;
    }
  }

  point.rc = find_rc(*base_graph_, base_config(phi, capacity, alpha), params, spec_.master_seed);
  if (cells_) {
    json evals = json::array();
    std::vector<uint64_t> seeds;
    for (const auto& [rate, eta] : point.rc.evaluations) {
      evals.push_back({rate, eta});
      if (rate > 0)
        for (int rep = 0; rep < params.n_seeds; ++rep)
          seeds.push_back(derive_run_seed(spec_.master_seed, phi, rate, alpha, rep));
    }
    json payload = {{"phi", phi},
                    {"capacity", capacity},
                    {"alpha", alpha},
                    {"rc", point.rc.rc},
                    {"threshold", point.rc.threshold},
                    {"eta_below", point.rc.eta_below},
                    {"eta_at", point.rc.eta_at},
                    {"evaluations", evals},
                    {"seeds", seeds}};
    cells_->store(key, payload.dump());
  }
  return point;
}

std::vector<RcPoint> Evaluator::rc_batch(
    const std::vector<std::tuple<double, double, double>>& points) const {
  std::vector<RcPoint> result(points.size());
  parallel_for(points.size(), workers_, [&](size_t i) {
    const auto& [phi, c, alpha] = points[i];
    result[i] = rc_point(phi, c, alpha);
  });
  return result;
}

PhiOptPoint Evaluator::phi_opt_point(double capacity, double alpha) const {
  return phi_opt_point(capacity, alpha, spec_.phi_opt);
}

PhiOptPoint Evaluator::phi_opt_point(double capacity, double alpha,
                                     const PhiOptParams& params) const {
  PhiOptPoint point;
  point.capacity = capacity;
  point.alpha = alpha;
  auto eval_batch = [&](std::span<const double> phis) {
    std::vector<std::tuple<double, double, double>> tuples;
    tuples.reserve(phis.size());
    for (double phi : phis) tuples.emplace_back(phi, capacity, alpha);
    const auto rcs = rc_batch(tuples);
    std::vector<double> values;
    values.reserve(rcs.size());
    for (const auto& rc : rcs) values.push_back(static_cast<double>(rc.rc.rc));
    return values;
  };
  point.result = find_phi_opt(eval_batch, params);
  return point;
}

BcRecord Evaluator::bc_record(uint64_t graph_seed) const {
  const std::string key = "bc|g=" + spec_.graph.cache_key(graph_seed);
  BcRecord record;
  record.graph_seed = graph_seed;

  if (cells_) {
    if (auto cached = cells_->load(key)) {
      json j = json::parse(*cached);
      record.mu = j.at("mu");
      record.fit = fit_from_json(j.at("fit"));
      for (const auto& b : j.at("bins"))
        record.bins.push_back({b.at(0).get<int32_t>(), b.at(1).get<double>(),
                               b.at(2).get<int64_t>()});
      return record;
    }
  }

  const Graph graph = spec_.graph.build(graph_seed);
  const BetweennessResult analysis = analyze_betweenness(graph);
  record.mu = analysis.fit.exponent;
  record.fit = analysis.fit;
  record.bins = analysis.bins;
  if (cells_) {
    json bins = json::array();
    for (const auto& b : record.bins) bins.push_back({b.degree, b.g_mean, b.count});
    json payload = {{"graph_seed", graph_seed},
                    {"mu", record.mu},
                    {"fit", fit_to_json(record.fit)},
                    {"bins", bins},
                    {"seeds", json::array({graph_seed})}};
    cells_->store(key, payload.dump());
  }
  return record;
}

std::vector<BcRecord> Evaluator::bc_batch(const std::vector<uint64_t>& graph_seeds) const {
  std::vector<BcRecord> result(graph_seeds.size());
  parallel_for(graph_seeds.size(), workers_,
               [&](size_t i) { result[i] = bc_record(graph_seeds[i]); });
  return result;
}

QueuePoint Evaluator::queue_point(double phi, double capacity, double alpha,
                                  int64_t rate) const {
  const std::string key = "queue|g=" + spec_.graph.cache_key() + "|s=" +
                          strategy_name(spec_.strategy) + "|phi=" + fmt17(phi) +
                          "|C=" + fmt17(capacity) + "|alpha=" + fmt17(alpha) +
                          "|R=" + std::to_string(rate) +
                          "|snap=" + std::to_string(spec_.measurement.snapshot_interval) + "|" +
                          measurement_key(spec_.measurement) +
                          "|master=" + std::to_string(spec_.master_seed);
  QueuePoint point;
  point.phi = phi;
  point.capacity = capacity;
  point.alpha = alpha;
  point.rate = rate;
  point.seed = derive_run_seed(spec_.master_seed, phi, rate, alpha, 0);

  if (cells_) {
    if (auto cached = cells_->load(key)) {
      json j = json::parse(*cached);
      point.eta = j.at("eta");
      point.n_packets = j.at("n_packets").get<std::vector<int64_t>>();
      for (const auto& s : j.at("snapshots")) {
        DegreeClassTotals snap;
        snap.step = s.at(0).get<int64_t>();
        for (const auto& kv : s.at(1))
          snap.totals.emplace_back(kv.at(0).get<int32_t>(), kv.at(1).get<int64_t>());
        point.snapshots.push_back(std::move(snap));
      }
      return point;
    }
  }

  SimConfig config = base_config(phi, capacity, alpha);
  config.packets_per_step = rate;
  config.snapshot_interval = spec_.measurement.snapshot_interval;
  config.seed = point.seed;
  RunRecord record = run(*base_graph_, config);
  point.eta =
      order_parameter(record.n_packets, rate, config.warmup_steps, config.window).eta;
  point.n_packets = std::move(record.n_packets);
  point.snapshots = std::move(record.snapshots);

  if (cells_) {
    json snaps = json::array();
    for (const auto& snap : point.snapshots) {
      json totals = json::array();
      for (auto [degree, total] : snap.totals) totals.push_back({degree, total});
      snaps.push_back({snap.step, totals});
    }
    json payload = {{"phi", phi},     {"capacity", capacity},
                    {"alpha", alpha}, {"R", rate},
                    {"eta", point.eta}, {"n_packets", point.n_packets},
                    {"snapshots", snaps}, {"seeds", json::array({point.seed})}};
    cells_->store(key, payload.dump());
  }
  return point;
}

std::vector<QueuePoint> Evaluator::queue_batch(
    const std::vector<std::tuple<double, double, double, int64_t>>& points) const {
  std::vector<QueuePoint> result(points.size());
  parallel_for(points.size(), workers_, [&](size_t i) {
    const auto& [phi, c, alpha, rate] = points[i];
    result[i] = queue_point(phi, c, alpha, rate);
  });
  return result;
}

// ---------------------------------------------------------------------------
// run_experiment

namespace {

std::vector<double> effective_alphas(const ExperimentSpec& spec) {
  if (spec.strategy == Strategy::kLocal) return sorted_unique(spec.alpha_axis);
  return {0.0};
}

std::string alpha_suffix(const ExperimentSpec& spec, double alpha) {
  if (spec.strategy != Strategy::kLocal) return "";
  return "_a" + fmt6(alpha);
}

}  // namespace

SweepResult run_experiment(const ExperimentSpec& spec, int workers) {
  const auto issues = validate_spec(spec);
  if (!issues.empty()) {
    std::string message = "invalid experiment spec:";
    for (const auto& issue : issues) message += "\n  " + issue;
    throw std::invalid_argument(message);
  }

  const fs::path out(spec.out_dir);
  fs::create_directories(out);
  const fs::path failed_marker = out / "FAILED";

  try {
    CellStore cells(out / "cells");
    Evaluator eval(spec, &cells, workers);
    SweepResult result;
    std::map<std::string, std::string> outputs;  // name -> content

    const auto phis = sorted_unique(spec.phi_axis);
    const auto capacities = sorted_unique(spec.capacity_axis);
    const auto alphas = effective_alphas(spec);
    const auto rates = sorted_unique(spec.r_axis);

    std::set<std::string> families(spec.families.begin(), spec.families.end());

    if (families.count("eta_curve")) {
      std::vector<std::tuple<double, double, double, int64_t>> tuples;
      for (double c : capacities)
        for (double a : alphas)
          for (double phi : phis)
            for (int64_t r : rates) tuples.emplace_back(phi, c, a, r);
      result.eta_points = eval.eta_batch(tuples);
      for (double c : capacities) {
        for (double a : alphas) {
          for (double phi : phis) {
            std::string csv = "R,eta\n";
            for (const auto& p : result.eta_points) {
              if (p.phi == phi && p.capacity == c && p.alpha == a)
                csv += std::to_string(p.rate) + "," + fmt6(p.eta_mean) + "\n";
            }
            outputs["eta_vs_R" + alpha_suffix(spec, a) + "_phi" + fmt6(phi) + "_C" + fmt6(c) +
                    ".csv"] = csv;
          }
        }
      }
    }

    if (families.count("rc_curve")) {
      std::vector<std::tuple<double, double, double>> tuples;
      for (double c : capacities)
        for (double a : alphas)
          for (double phi : phis) tuples.emplace_back(phi, c, a);
      result.rc_points = eval.rc_batch(tuples);
      for (double c : capacities) {
        for (double a : alphas) {
          std::string csv = "phi,Rc,eta_lo,eta_hi,seeds\n";
          for (const auto& p : result.rc_points) {
            if (p.capacity == c && p.alpha == a)
              csv += fmt6(p.phi) + "," + std::to_string(p.rc.rc) + "," + fmt6(p.rc.eta_below) +
                     "," + fmt6(p.rc.eta_at) + "," + std::to_string(spec.seeds_per_point) + "\n";
          }
          outputs["rc_vs_phi_C" + fmt6(c) + alpha_suffix(spec, a) + ".csv"] = csv;
        }
      }
    }

    if (families.count("betweenness")) {
      std::vector<uint64_t> seeds = spec.graph.kind == GraphSpec::Kind::kBa
                                        ? sorted_unique(spec.graph_seeds)
                                        : std::vector<uint64_t>{spec.graph.ba.seed};
      result.bc_records = eval.bc_batch(seeds);
      std::string csv = "k,g_mean,count\n";
      for (const auto& bin : result.bc_records.front().bins)
        csv += std::to_string(bin.degree) + "," + fmt6(bin.g_mean) + "," +
               std::to_string(bin.count) + "\n";
      outputs["betweenness_vs_degree.csv"] = csv;

      std::string mu_csv = "graph_seed,mu,k_lo,k_hi,n_bins\n";
      for (const auto& record : result.bc_records)
        mu_csv += std::to_string(record.graph_seed) + "," + fmt6(record.mu) + "," +
                  fmt6(record.fit.k_lo) + "," + fmt6(record.fit.k_hi) + "," +
                  std::to_string(record.fit.n_bins) + "\n";
      outputs["betweenness_mu.csv"] = mu_csv;
    }

    if (families.count("queue_evolution")) {
      std::vector<std::tuple<double, double, double, int64_t>> tuples;
      for (double c : capacities)
        for (double a : alphas)
          for (double phi : phis)
            for (int64_t r : rates) tuples.emplace_back(phi, c, a, r);
      result.queue_points = eval.queue_batch(tuples);
      for (const auto& p : result.queue_points) {
        std::string csv = "step,degree,queue_total\n";
        for (const auto& snap : p.snapshots) {
          for (auto [degree, total] : snap.totals)
            csv += std::to_string(snap.step) + "," + std::to_string(degree) + "," +
                   std::to_string(total) + "\n";
        }
        outputs["queue_evolution" + alpha_suffix(spec, p.alpha) + "_phi" + fmt6(p.phi) + "_C" +
                fmt6(p.capacity) + "_R" + std::to_string(p.rate) + ".csv"] = csv;
      }
    }

    if (families.count("phi_opt") || families.count("max_rc")) {
      for (double c : capacities)
        for (double a : alphas) result.phi_opt_points.push_back(eval.phi_opt_point(c, a));

      if (families.count("phi_opt")) {
        std::string csv = "capacity,alpha,phi_opt,rc_at_opt\n";
        for (const auto& p : result.phi_opt_points)
          csv += fmt6(p.capacity) + "," + fmt6(p.alpha) + "," + fmt6(p.result.phi_opt) + "," +
                 fmt6(p.result.rc_at_opt) + "\n";
        outputs["phi_opt_vs_alpha.csv"] = csv;
      }
      if (families.count("max_rc")) {
        std::string csv = "capacity,alpha,max_rc,phi_at_max\n";
        for (const auto& p : result.phi_opt_points)
          csv += fmt6(p.capacity) + "," + fmt6(p.alpha) + "," + fmt6(p.result.rc_at_opt) + "," +
                 fmt6(p.result.phi_opt) + "\n";
        outputs["max_rc_vs_alpha.csv"] = csv;
      }
    }

    for (const auto& [name, content] : outputs) write_file_atomic(out / name, content);

    // Manifest: the config echo plus every cell file this run touched.
    json manifest;
    manifest["config"] = json::parse(spec_to_json(spec));
    manifest["spec_hash"] = hex16(hash_bytes(spec_to_json(spec)));
    const Graph& graph = eval.base_graph();
    manifest["graph"] = {{"nodes", graph.node_count()},
                         {"edges", graph.edge_count()},
                         {"min_degree", graph.min_degree()},
                         {"max_degree", graph.max_degree()}};
    json output_names = json::array();
    for (const auto& [name, content] : outputs) output_names.push_back(name);
    manifest["outputs"] = output_names;

    json cell_list = json::array();
    std::vector<fs::path> cell_files;
    for (const auto& entry : fs::directory_iterator(out / "cells"))
      if (entry.path().extension() == ".json") cell_files.push_back(entry.path());
    std::sort(cell_files.begin(), cell_files.end());
    for (const auto& path : cell_files) {
      try {
        json cell = json::parse(read_file(path));
        json item = {{"file", "cells/" + path.filename().string()},
                     {"key", cell.value("key", "")}};
        if (cell.contains("payload") && cell["payload"].contains("seeds"))
          item["seeds"] = cell["payload"]["seeds"];
        cell_list.push_back(item);
      } catch (...) {
        // unreadable cell files are simply not listed
      }
    }
    manifest["cells"] = cell_list;
    write_file_atomic(out / "manifest.json", manifest.dump(1));

    if (fs::exists(failed_marker)) fs::remove(failed_marker);
    return result;
  } catch (const std::exception& e) {
    try {
      write_file_atomic(failed_marker, std::string(e.what()) + "\n");
    } catch (...) {
    }
    throw;
  }
}

}  // namespace traffic
