#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "traffic/engine.hpp"
#include "traffic/graph.hpp"

namespace traffic {

// eta = slope of N_p(t) over the post-warmup window, divided by R. Zero in
// free flow, positive once packets pile up.
struct OrderParameterEstimate {
  double eta = 0.0;      // clamped at zero
  double eta_raw = 0.0;  // slope / R, can dip slightly negative from noise
  double slope = 0.0;    // packets per step
  int64_t window = 0;    // dt
  int64_t rate = 0;      // R
};

// Least-squares slope of the series after `warmup`; requires at least
// warmup + 2*dt points so the window spans two averaging sub-windows.
OrderParameterEstimate order_parameter(std::span<const int64_t> n_packets, int64_t rate,
                                       int64_t warmup, int64_t dt);

struct CriticalRate {
  int64_t rc = 0;          // smallest congested integer R
  double threshold = 0.0;  // eta level that counts as congested
  double eta_below = 0.0;  // mean eta at rc - 1
  double eta_at = 0.0;     // mean eta at rc
  std::vector<std::pair<int64_t, double>> evaluations;  // bisection trace
};

struct RcSearchParams {
  int64_t r_lo = 0;  // R = 0 is free flow by definition and never simulated
  int64_t r_hi = 100;
  double eta_threshold = 0.01;
  int n_seeds = 5;
};

struct NoBracketError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bisection on integer R for the smallest rate whose mean eta reaches the
// threshold. `mean_eta` is only called with R >= 1. Throws NoBracketError
// when the range does not straddle the transition.
CriticalRate find_rc(const std::function<double(int64_t)>& mean_eta,
                     const RcSearchParams& params);

// Replicate seeds are hash(master_seed, phi, R, alpha, replicate); the mean
// capacity is deliberately not part of the derivation so runs at different
// budgets share traffic seeds.
uint64_t derive_run_seed(uint64_t master_seed, double phi, int64_t rate, double alpha,
                         int replicate);

// Mean eta over n_seeds replicate runs of `base` at rate R.
double run_mean_eta(const Graph& graph, const SimConfig& base, int64_t rate,
                    uint64_t master_seed, int n_seeds,
                    std::vector<double>* per_seed = nullptr);

CriticalRate find_rc(const Graph& graph, const SimConfig& base, const RcSearchParams& params,
                     uint64_t master_seed);

// Exact betweenness centrality, ordered-pair convention: g(v) sums
// sigma_st(v)/sigma_st over all ordered pairs s != t with v interior.
std::vector<double> betweenness_centrality(const Graph& graph);

struct PowerLawFit {
  double exponent = 0.0;
  double log_prefactor = 0.0;  // intercept of the log-log fit
  double rms_residual = 0.0;
  double k_lo = 0.0, k_hi = 0.0;
  int n_bins = 0;
};

// Bins y by exact x, averages within bins, then least-squares fits
// log(mean) vs log(x) over [k_lo, k_hi]. Requires >= 3 distinct x values in
// range and positive bin means.
PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points, double k_lo,
                          double k_hi);

struct BcBin {
  int32_t degree = 0;
  double g_mean = 0.0;
  int64_t count = 0;
};

struct BetweennessResult {
  std::vector<double> g;      // per node
  std::vector<BcBin> bins;    // mean g per exact degree
  PowerLawFit fit;            // g(k) ~ k^mu over [min degree, last degree with >= 2 nodes]
};

BetweennessResult analyze_betweenness(const Graph& graph);

// Fits the mean per-node queue length by degree, n(k), from the post-warmup
// snapshots of a free-flow run. Throws std::invalid_argument when the run
// was congested (eta above the threshold) or lacks snapshots.
PowerLawFit queue_exponent(const RunRecord& record, const Graph& graph, const SimConfig& config,
                           double eta_threshold = 0.01);

struct PhiOptParams {
  double phi_lo = 0.0;
  double phi_hi = 2.5;
  double coarse_step = 0.25;
  double fine_step = 0.05;
  double refine_halfwidth = 0.15;  // fine grid spans argmax +/- this
  bool refine = true;
};

struct PhiOptResult {
  double phi_opt = 0.0;
  double rc_at_opt = 0.0;
  std::vector<std::pair<double, double>> coarse;   // (phi, mean rc)
  std::vector<std::pair<double, double>> refined;  // (phi, mean rc), empty if !refine
};

// Coarse grid scan then local refinement around the peak. `eval_batch` maps
// a batch of phi values to mean critical rates (batched so the caller can
// run them concurrently). phi_opt is the mean of the argmax ties over all
// evaluated points, which centres it on integer-R_c plateaus.
PhiOptResult find_phi_opt(
    const std::function<std::vector<double>(std::span<const double>)>& eval_batch,
    const PhiOptParams& params);

}  // namespace traffic
