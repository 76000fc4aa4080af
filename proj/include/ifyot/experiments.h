#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ifyot/common.h"
#include "ifyot/io.h"
#include "ifyot/measures.h"

namespace ifyot {

// Worker count: IFYOT_THREADS when set (clamped to >= 1), otherwise the
// hardware concurrency.
int thread_budget();

// Runs body(0..count-1) across a pool with atomic index dispatch. Cell
// outputs must go to preallocated per-index slots; the first exception is
// rethrown after all workers join.
void parallel_for(Index count, const std::function<void(Index)>& body);

// Log-spaced grid, points_per_decade per decade, endpoints included.
Vector log_lambda_grid(double lo = 1e-6, double hi = 1.0,
                       int points_per_decade = 20);

struct LambdaSearch {
  double best_lambda = 0.0;
  double best_metric = kInf;
  Vector lambdas;
  Vector metrics;
};

// Evaluates metric over the grid in ascending order; equal metric values
// resolve to the largest lambda.
LambdaSearch grid_search_lambda(const Vector& lambdas,
                                const std::function<double(double)>& metric);

// Least-squares slope of log(y) against log(x); pairs with non-finite or
// nonpositive entries are dropped.
double fitted_loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y);

// Inverse-CDF draws of n index pairs from a coupling's weight matrix
// w_ij = density_ij * a_i * b_j; the sample keeps the coupling's total mass.
class Rng;
struct UotProblem;
struct Coupling;
CoupledSample sample_pairs_from_coupling(const UotProblem& prob,
                                         const Coupling& coupling, Index n,
                                         Rng& rng);

struct ExperimentOutput {
  CsvTable results;
  nlohmann::json summary;
};

struct ForwardUotParams {
  Index n = 40;
  int dim = 1;
  std::vector<double> etas = {1.0, 0.3, 0.1, 0.03, 0.01};
  std::string div1 = "kl:1";
  std::string div2 = "kl:1";
  std::uint64_t seed = 0;
};
ExperimentOutput run_forward_uot(const ForwardUotParams& params);

struct IuotFitParams {
  Index grid_size = 30;
  double eta = 0.3;
  std::string div1 = "kl:1";
  std::string div2 = "kl:1";
  std::vector<double> theta_star = {1.0, 0.5};
  Index n_pairs = 2000;  // 0: fit from the exact population coupling
  double lambda = 0.01;  // ridge weight
  std::uint64_t seed = 0;
};
ExperimentOutput run_iuot(const IuotFitParams& params);

struct IjkoFitParams {
  int d = 2;
  double tau = 0.5;
  double eta = 0.05;
  double r = 1.0;
  int steps = 2;  // transitions
  Index n = 60;   // atoms per snapshot
  std::uint64_t seed = 0;
};
ExperimentOutput run_ijko(const IjkoFitParams& params);

struct SampleSweepParams {
  Index grid_size = 40;
  double eta = 0.3;
  std::string div1 = "kl:1";
  std::string div2 = "kl:1";
  std::vector<double> theta_star = {1.0, 0.5};
  std::vector<Index> n_values = {100, 200, 400, 800, 1600, 3200, 6400};
  int seeds = 10;
  double lambda_coeff = 0.05;  // lambda = coeff / sqrt(n)
  std::uint64_t base_seed = 0;
};
ExperimentOutput run_sample_sweep(const SampleSweepParams& params);

struct CertificateSweepParams {
  std::string kind = "sparse";  // sparse | low-rank
  int d = 4;
  double tau = 0.1;
  std::vector<int> steps_values = {2, 4, 6, 8};
  std::vector<double> sigmas = {0.05, 0.1, 0.2, 0.5, 1.0, 2.0};  // sparse
  std::vector<double> omegas;                                    // low-rank
  double delta = 1e-4;
  double mean_shift = 2.0;  // sparse mean = shift * ones; low-rank mean = 0
};
ExperimentOutput run_certificate_sweep(const CertificateSweepParams& params);

struct SparseGraphParams {
  int d = 4;
  double sigma = 1.0;
  int steps = 2;  // transitions
  double tau = 0.1;
  double eta = 1e-2;
  double r = 1.0;
  std::vector<Index> n_values = {50, 100, 200, 400};
  int seeds = 1;
  Vector lambda_grid;  // empty: default log grid
  double support_threshold = 1e-5;
  double mean_shift = 2.0;
  std::uint64_t base_seed = 0;
};
ExperimentOutput run_sparse_graph(const SparseGraphParams& params);

struct LowRankParams {
  int d = 4;
  std::vector<double> omegas = {0.0, 0.1, 0.4};  // units of pi
  int steps = 2;
  double tau = 0.1;
  double eta = 1e-4;
  double r = 1.0;
  double delta = 1e-4;
  std::vector<Index> n_values = {50, 100, 200, 400};
  int seeds = 1;
  Vector lambda_grid;
  double rank_threshold = 1e-4;
  std::uint64_t base_seed = 0;
};
ExperimentOutput run_low_rank(const LowRankParams& params);

// Config-driven entry points backing the CLI. Return 0 on success, 2 on a
// configuration error, 3 on an I/O error; a human-readable message is left
// in *error for nonzero returns.
int run_config_file(const std::string& path, std::string* error);
int validate_config_file(const std::string& path, std::string* error);
int plot_file(const std::string& csv_path, const std::string& spec_path,
              std::string* error);

}  // namespace ifyot
