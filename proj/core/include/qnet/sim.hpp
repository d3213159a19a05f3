#pragma once

#include "qnet/background.hpp"
#include "qnet/linalg.hpp"
#include "qnet/model.hpp"
#include "qnet/moments.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace qnet {

/// lambda -> N lambda, block rates -> N^alpha q.
struct SimConfig {
  double n_scale = 1.0;
  double alpha = 0.0;
  double horizon = 1.0;
  double grid = 1.0;  ///< sampling step; samples at 0, grid, 2 grid, ... <= horizon
  std::size_t reps = 1;
  std::uint64_t seed = 1;
  InitialCondition init;  ///< counts are used as given (not scaled)
  unsigned threads = 0;   ///< 0: hardware concurrency, capped by QNET_THREADS
  bool keep_trajectories = false;
};

/// Cadlag samples of one replication on the grid.
struct Trajectory {
  std::vector<long> counts;  ///< grid x nodes, row-major
  std::vector<long> loss;
  std::vector<std::uint32_t> state;
  std::vector<std::uint64_t> arrivals_by_state;  ///< background state seen by each arrival
  std::uint64_t events = 0;

  long count(std::size_t g, std::size_t node, std::size_t nodes) const { return counts[g * nodes + node]; }
};

struct SimEnsemble {
  std::vector<double> times;
  std::size_t reps = 0;
  std::size_t nodes = 0;
  Matrix mean;                  ///< grid x nodes
  Matrix mean_se;               ///< grid x nodes
  std::vector<Matrix> cov;      ///< per grid time
  std::vector<Matrix> cov_se;   ///< per grid time
  Vector loss_mean;             ///< per grid time
  Vector loss_se;
  Vector arrival_state_fraction;  ///< pooled over reps
  std::vector<Trajectory> trajectories;  ///< only when keep_trajectories
};

/// The engine for replication `rep`: mt19937_64 seeded with
/// seed_seq{seed low, seed high, rep low, rep high} (32-bit halves).
std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t rep);

std::vector<double> sample_times(const SimConfig& config);

Trajectory run_one(const ValidatedNetwork& net, const SimConfig& config, std::size_t rep_index);
SimEnsemble run_ensemble(const ValidatedNetwork& net, const SimConfig& config);

/// Threads to use for `requested` (0 = all cores), honouring QNET_THREADS.
unsigned effective_threads(unsigned requested);

struct FcltSample {
  Matrix samples;  ///< reps x nodes, (M(t) - N rho)/sqrt(N)
  Vector mean;
  Vector mean_se;
  Matrix cov;
  Matrix cov_se;
};

/// Empty start, horizon t; `rho` is the fluid level at t.
FcltSample fclt_empirical(const ValidatedNetwork& net, SimConfig config, double t, const Vector& rho);

struct TaggedEstimate {
  std::size_t clients = 0;
  double omega = 0.0;
  double omega_se = 0.0;
  double tau = 0.0;  ///< E[T 1{lost}]
  double tau_se = 0.0;
};

/// Follows single clients from arrival (node by lambda, background state by
/// its stationary law) until exit or loss.
TaggedEstimate tagged_client_estimate(const ValidatedNetwork& net, std::size_t clients, std::uint64_t seed,
                                      unsigned threads = 0);

/// Sample mean, covariance and standard errors of rows of `x` (reps x d).
void sample_moments(const Matrix& x, Vector& mean, Vector& mean_se, Matrix& cov, Matrix& cov_se);

}  // namespace qnet
