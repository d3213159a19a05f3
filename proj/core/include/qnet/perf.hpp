#pragma once

#include "qnet/background.hpp"
#include "qnet/linalg.hpp"
#include "qnet/model.hpp"

namespace qnet {

/// Per-entry-state loss probabilities and mean time in the network jointly
/// with eventual loss, for a client arriving at node i in background state k.
struct LossMetrics {
  Matrix omega;  ///< n x states, omega(i,k) in [0,1]
  Matrix tau;    ///< n x states, E[T 1{lost}]
  Matrix sigma;  ///< nu_i + mu_i0 + q_k
  double omega_agg = 0.0;
  double tau_agg = 0.0;

  /// E[T | lost]; zero when nothing is ever lost.
  double conditional_tau() const { return omega_agg > 0.0 ? tau_agg / omega_agg : 0.0; }
};

/// Both systems share one matrix: rows sigma_eff(i,k) with
/// sigma_eff = mu_i0 + sum_j up mu_ij + sum_j down f_ij mu_ij + q_k, retries removed.
/// Throws NumericalError when the matrix is not (irreducibly) diagonally dominant.
LossMetrics loss_metrics(const ValidatedNetwork& net, const BackgroundChain& chain);

Matrix loss_probability(const ValidatedNetwork& net, const BackgroundChain& chain);
Matrix mean_time_to_loss(const ValidatedNetwork& net, const BackgroundChain& chain);

}  // namespace qnet
