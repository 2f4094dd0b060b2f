#include "traffic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

#include "traffic/rng.hpp"

namespace traffic {

OrderParameterEstimate order_parameter(std::span<const int64_t> n_packets, int64_t rate,
                                       int64_t warmup, int64_t dt) {
  if (rate < 1) throw std::invalid_argument("order parameter: rate must be >= 1");
  if (warmup < 0 || dt < 1) throw std::invalid_argument("order parameter: bad window");
  const auto len = static_cast<int64_t>(n_packets.size());
  if (len < warmup + 2 * dt)
    throw std::invalid_argument("order parameter: series too short for warmup + 2*dt");

  // Least-squares slope over the post-warmup window; equivalent to
  // averaging Delta N_p over width-dt sub-windows.
  const int64_t count = len - warmup;
  double mean_x = 0.0, mean_y = 0.0;
  for (int64_t i = 0; i < count; ++i) {
    mean_x += static_cast<double>(i);
    mean_y += static_cast<double>(n_packets[warmup + i]);
  }
  mean_x /= static_cast<double>(count);
  mean_y /= static_cast<double>(count);
  double sxy = 0.0, sxx = 0.0;
  for (int64_t i = 0; i < count; ++i) {
    const double dx = static_cast<double>(i) - mean_x;
    sxy += dx * (static_cast<double>(n_packets[warmup + i]) - mean_y);
    sxx += dx * dx;
  }
  OrderParameterEstimate est;
  est.slope = sxy / sxx;
  est.window = dt;
  est.rate = rate;
  est.eta_raw = est.slope / static_cast<double>(rate);
  est.eta = std::max(0.0, est.eta_raw);
  return est;
}

CriticalRate find_rc(const std::function<double(int64_t)>& mean_eta,
                     const RcSearchParams& params) {
  if (params.r_lo < 0 || params.r_hi <= params.r_lo)
    throw std::invalid_argument("find_rc: bad search range");
  CriticalRate result;
  result.threshold = params.eta_threshold;
  auto eval = [&](int64_t rate) {
    const double eta = rate == 0 ? 0.0 : mean_eta(rate);
    result.evaluations.emplace_back(rate, eta);
    return eta;
  };

  double eta_lo = eval(params.r_lo);
  if (eta_lo >= params.eta_threshold)
    throw NoBracketError("find_rc: eta already above threshold at r_lo=" +
                         std::to_string(params.r_lo));
  double eta_hi = eval(params.r_hi);
  if (eta_hi < params.eta_threshold)
    throw NoBracketError("find_rc: eta below threshold across range, r_hi=" +
                         std::to_string(params.r_hi));

  int64_t lo = params.r_lo, hi = params.r_hi;
  while (hi - lo > 1) {
    const int64_t mid = lo + (hi - lo) / 2;
    const double eta = eval(mid);
    if (eta >= params.eta_threshold) {
      hi = mid;
      eta_hi = eta;
    } else {
      lo = mid;
      eta_lo = eta;
    }
  }
  result.rc = hi;
  result.eta_below = eta_lo;
  result.eta_at = eta_hi;
  return result;
}

uint64_t derive_run_seed(uint64_t master_seed, double phi, int64_t rate, double alpha,
                         int replicate) {
  uint64_t seed = combine(master_seed, phi);
  seed = combine(seed, static_cast<uint64_t>(rate));
  seed = combine(seed, alpha);
  return combine(seed, static_cast<uint64_t>(replicate));
}

double run_mean_eta(const Graph& graph, const SimConfig& base, int64_t rate,
                    uint64_t master_seed, int n_seeds, std::vector<double>* per_seed) {
  if (n_seeds < 1) throw std::invalid_argument("mean eta: need at least one seed");
  SimConfig config = base;
  config.packets_per_step = rate;
  double sum = 0.0;
  for (int rep = 0; rep < n_seeds; ++rep) {
    config.seed = derive_run_seed(master_seed, base.phi, rate, base.alpha, rep);
    const RunRecord record = run(graph, config);
    const auto est =
        order_parameter(record.n_packets, rate, config.warmup_steps, config.window);
    if (per_seed) per_seed->push_back(est.eta);
    sum += est.eta;
  }
  return sum / n_seeds;
}

CriticalRate find_rc(const Graph& graph, const SimConfig& base, const RcSearchParams& params,
                     uint64_t master_seed) {
  return find_rc(
      [&](int64_t rate) {
        return run_mean_eta(graph, base, rate, master_seed, params.n_seeds);
      },
      params);
}

std::vector<double> betweenness_centrality(const Graph& graph) {
  const NodeId n = graph.node_count();
  std::vector<double> g(n, 0.0);

  std::vector<int32_t> dist(n);
  std::vector<uint64_t> sigma(n);
  std::vector<double> delta(n);
  std::vector<NodeId> order;  // BFS visitation order
  std::vector<std::vector<NodeId>> preds(n);
  order.reserve(n);

  for (NodeId s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(sigma.begin(), sigma.end(), 0);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto& p : preds) p.clear();
    order.clear();

    dist[s] = 0;
    sigma[s] = 1;
    std::queue<NodeId> q;
    q.push(s);
    while (!q.empty()) {
      const NodeId v = q.front();
      q.pop();
      order.push_back(v);
      for (NodeId w : graph.neighbors(v)) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    // Dependency accumulation, reverse BFS order.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const NodeId w = *it;
      for (NodeId v : preds[w]) {
        delta[v] += static_cast<double>(sigma[v]) / static_cast<double>(sigma[w]) *
                    (1.0 + delta[w]);
      }
      if (w != s) g[w] += delta[w];
    }
  }
  return g;
}

PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points, double k_lo,
                          double k_hi) {
  std::map<double, std::pair<double, int64_t>> bins;  // x -> (sum y, count)
  for (const auto& [x, y] : points) {
    if (x < k_lo || x > k_hi) continue;
    auto& [sum, count] = bins[x];
    sum += y;
    ++count;
  }
  if (bins.size() < 3)
    throw std::invalid_argument("power-law fit: need >= 3 distinct x values in range");

  std::vector<double> lx, ly;
  lx.reserve(bins.size());
  ly.reserve(bins.size());
  for (const auto& [x, acc] : bins) {
    const double mean = acc.first / static_cast<double>(acc.second);
    if (!(mean > 0.0))
      throw std::invalid_argument("power-law fit: nonpositive bin mean at x=" +
                                  std::to_string(x));
    lx.push_back(std::log(x));
    ly.push_back(std::log(mean));
  }

  const auto nb = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= nb;
  my /= nb;
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }

  PowerLawFit fit;
  fit.exponent = sxy / sxx;
  fit.log_prefactor = my - fit.exponent * mx;
  double ss = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (fit.log_prefactor + fit.exponent * lx[i]);
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / nb);
  fit.k_lo = k_lo;
  fit.k_hi = k_hi;
  fit.n_bins = static_cast<int>(lx.size());
  return fit;
}

namespace {

// Fit range shared by the betweenness and queue-length fits: exact-degree
// bins from the minimum degree up to the largest degree still held by at
// least two nodes; singleton bins above that are noise from lone hubs.
std::pair<int32_t, int32_t> default_fit_range(const Graph& graph) {
  std::map<int32_t, int64_t> count_by_degree;
  for (int32_t k : graph.degrees()) ++count_by_degree[k];
  int32_t hi = 0;
  for (auto [k, count] : count_by_degree) {
    if (count >= 2) hi = k;
  }
  return {graph.min_degree(), hi};
}

}  // namespace

BetweennessResult analyze_betweenness(const Graph& graph) {
  BetweennessResult result;
  result.g = betweenness_centrality(graph);

  std::map<int32_t, std::pair<double, int64_t>> by_degree;
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    auto& [sum, count] = by_degree[graph.degrees()[v]];
    sum += result.g[v];
    ++count;
  }
  for (auto [k, acc] : by_degree)
    result.bins.push_back({k, acc.first / static_cast<double>(acc.second), acc.second});

  const auto [k_lo, k_hi] = default_fit_range(graph);
  std::vector<std::pair<double, double>> points;
  for (const auto& bin : result.bins) {
    if (bin.g_mean > 0.0) points.emplace_back(bin.degree, bin.g_mean);
  }
  result.fit = fit_power_law(points, k_lo, k_hi);
  return result;
}

PowerLawFit queue_exponent(const RunRecord& record, const Graph& graph, const SimConfig& config,
                           double eta_threshold) {
  const auto est = order_parameter(record.n_packets, config.packets_per_step,
                                   config.warmup_steps, config.window);
  if (est.eta > eta_threshold)
    throw std::invalid_argument("queue exponent: run is congested (eta=" +
                                std::to_string(est.eta) + "), fit requires free flow");

  std::map<int32_t, int64_t> count_by_degree;
  for (int32_t k : graph.degrees()) ++count_by_degree[k];

  std::map<int32_t, double> summed;
  int64_t n_snapshots = 0;
  for (const auto& snap : record.snapshots) {
    if (snap.step < config.warmup_steps) continue;
    ++n_snapshots;
    for (auto [degree, total] : snap.totals) summed[degree] += static_cast<double>(total);
  }
  if (n_snapshots == 0)
    throw std::invalid_argument("queue exponent: no post-warmup snapshots in record");

  std::vector<std::pair<double, double>> points;
  for (auto [degree, sum] : summed) {
    const double mean_per_node =
        sum / static_cast<double>(n_snapshots) / static_cast<double>(count_by_degree[degree]);
    if (mean_per_node > 0.0) points.emplace_back(degree, mean_per_node);
  }
  const auto [k_lo, k_hi] = default_fit_range(graph);
  return fit_power_law(points, k_lo, k_hi);
}

namespace {

double round9(double x) { return std::round(x * 1e9) / 1e9; }

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> values;
  const auto count = static_cast<int>(std::round((hi - lo) / step));
  for (int i = 0; i <= count; ++i) values.push_back(round9(lo + i * step));
  return values;
}

}  // namespace

PhiOptResult find_phi_opt(
    const std::function<std::vector<double>(std::span<const double>)>& eval_batch,
    const PhiOptParams& params) {
  if (!(params.phi_hi > params.phi_lo) || !(params.coarse_step > 0))
    throw std::invalid_argument("phi_opt: bad grid");

  PhiOptResult result;
  const std::vector<double> coarse_grid = grid(params.phi_lo, params.phi_hi, params.coarse_step);
  const std::vector<double> coarse_vals = eval_batch(coarse_grid);
  for (size_t i = 0; i < coarse_grid.size(); ++i)
    result.coarse.emplace_back(coarse_grid[i], coarse_vals[i]);

  auto argmax_center = [](const std::vector<std::pair<double, double>>& pts) {
    double best = pts.front().second;
    for (const auto& [phi, rc] : pts) best = std::max(best, rc);
    double sum = 0.0;
    int ties = 0;
    for (const auto& [phi, rc] : pts) {
      if (rc == best) {
        sum += phi;
        ++ties;
      }
    }
    return std::pair<double, double>{sum / ties, best};
  };

  auto [coarse_center, coarse_best] = argmax_center(result.coarse);
  result.phi_opt = coarse_center;
  result.rc_at_opt = coarse_best;
  if (!params.refine) return result;

  const double lo = std::max(params.phi_lo, round9(coarse_center - params.refine_halfwidth));
  const double hi = std::min(params.phi_hi, round9(coarse_center + params.refine_halfwidth));
  const std::vector<double> fine_grid = grid(lo, hi, params.fine_step);
  const std::vector<double> fine_vals = eval_batch(fine_grid);
  for (size_t i = 0; i < fine_grid.size(); ++i)
    result.refined.emplace_back(fine_grid[i], fine_vals[i]);

  // Final pick over everything evaluated, deduplicated by phi (the coarse
  // argmax usually reappears in the fine grid).
  std::map<double, double> merged;
  for (const auto& [phi, rc] : result.coarse) merged[phi] = rc;
  for (const auto& [phi, rc] : result.refined) merged[phi] = rc;
  std::vector<std::pair<double, double>> all(merged.begin(), merged.end());
  auto [center, best] = argmax_center(all);
  result.phi_opt = center;
  result.rc_at_opt = best;
  return result;
}

}  // namespace traffic
