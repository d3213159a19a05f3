#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace qnet::analytic {

/// Fully symmetric complete network on one block.
struct SymmetricSpec {
  std::size_t n = 3;
  double lambda = 2.0;
  double nu = 1.0;
  double mu0 = 1.0;
  double q0 = 1.0;
  double q1 = 1.0;
  double f = 1.0;  ///< 0 or 1

  double sigma() const { return nu + mu0; }
  double pi() const { return q0 / (q0 + q1); }
  double q() const { return q0 + q1; }
  /// nu (1 - pi) + mu0.
  double kappa() const { return nu * (1.0 - pi()) + mu0; }
};

/// Per-node mean at time t from an empty start, or stationary when t is empty.
double symmetric_mean(const SymmetricSpec& spec, std::optional<double> t = std::nullopt);

/// Modulation part of the covariance, xi(t) E_n, for f = 1.
double symmetric_fclt_xi(const SymmetricSpec& spec, double t);
double symmetric_fclt_xi_limit(const SymmetricSpec& spec);

/// Two-node tandem: arrivals at node 1, link 1->2 (rate mu1, loss probability f)
/// on one block, exits from node 2 at rate mu2.
struct TandemParams {
  double lambda = 1.0;
  double mu1 = 1.0;
  double mu2 = 1.0;
  double q0 = 1.0;
  double q1 = 1.0;
  double f = 1.0;
};

struct TandemMeans {
  double v10 = 0.0;  ///< E[M_1 1{down}]
  double v11 = 0.0;
  double v20 = 0.0;
  double v21 = 0.0;
  double loss_rate = 0.0;  ///< f mu1 v10
};

TandemMeans tandem_stationary_means(const TandemParams& p);

/// Stationary node-1 law of the f = 0 tandem: Poisson(lambda/mu1) plus an
/// independent mixture of negative binomials NB(r, p) and NB(r - 1, p).
struct TandemNode1Law {
  double poisson_mean = 0.0;
  double p = 1.0;       ///< q0 / (q0 + lambda)
  double shape = 1.0;   ///< r = q1/mu1 + 1, weight w_down
  double w_down = 0.0;  ///< q1 / (q0 + q1)
  double w_up = 1.0;    ///< q0 / (q0 + q1), shape r - 1

  static TandemNode1Law from(const TandemParams& p);
  double mean() const;
  double variance() const;
};

double tandem_node1_pgf(const TandemParams& p, double z);

/// P(M_1 = m).
double tandem_node1_pmf(const TandemParams& p, std::size_t m);

/// pmf on 0..L-1 with L the first length whose tail mass is below `tail`.
std::vector<double> tandem_node1_pmf_table(const TandemParams& p, double tail = 1e-12);

/// Negative binomial (failures before the r-th success) pmf with real shape r >= 0.
double negative_binomial_pmf(double r, double p, std::size_t k);
double poisson_pmf(double mean, std::size_t k);

}  // namespace qnet::analytic
