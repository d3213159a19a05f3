#pragma once

#include "qnet/background.hpp"
#include "qnet/linalg.hpp"
#include "qnet/model.hpp"
#include "qnet/moments.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace qnet {

inline constexpr std::size_t kMaxOracleStates = 2'000'000;

/// Exact CTMC of (M, L, X) with M_i <= cap_i. Arrivals into a full queue are
/// dropped; a jump into a full queue removes the customer from its source.
/// The loss count, when tracked, saturates at `loss_cap`.
class TruncatedChain {
 public:
  TruncatedChain(const ValidatedNetwork& net, const BackgroundChain& chain, std::vector<unsigned> caps,
                 std::optional<unsigned> loss_cap = std::nullopt);

  std::size_t node_count() const { return caps_.size(); }
  std::size_t background_states() const { return states_; }
  std::size_t size() const { return static_cast<std::size_t>(generator_.rows()); }
  const std::vector<unsigned>& caps() const { return caps_; }
  bool tracks_loss() const { return loss_cap_.has_value(); }
  std::optional<unsigned> loss_cap() const { return loss_cap_; }

  /// Row-compressed generator.
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& generator() const { return generator_; }

  /// Flat index of (counts, loss, background state); the background state varies fastest.
  std::size_t index(const std::vector<unsigned>& counts, unsigned loss, std::size_t state) const;
  unsigned count(std::size_t flat, std::size_t node) const;
  unsigned loss(std::size_t flat) const;
  std::size_t state(std::size_t flat) const { return flat % states_; }
  bool on_boundary(std::size_t flat) const;

  /// Expected loss events per unit time in chain state `flat`.
  double loss_flow(std::size_t flat) const { return loss_flow_[flat]; }

  const ValidatedNetwork& network() const { return net_; }
  const Vector& background_stationary() const { return pi_; }

 private:
  ValidatedNetwork net_;
  std::vector<unsigned> caps_;
  std::optional<unsigned> loss_cap_;
  std::size_t states_;
  Vector pi_;
  std::vector<std::size_t> stride_;  ///< per node, then loss
  Eigen::SparseMatrix<double, Eigen::RowMajor> generator_;
  std::vector<double> loss_flow_;
};

struct OracleOptions {
  /// When false, boundary mass above the error threshold only warns.
  bool strict = true;
  double warn_boundary = 1e-6;
  double max_boundary = 1e-3;
};

/// A probability vector over a truncated chain with moment extraction.
/// Keeps a pointer to the chain, which must outlive it.
class OracleDistribution {
 public:
  OracleDistribution(const TruncatedChain& tc, Vector prob, const OracleOptions& opts);

  const Vector& probabilities() const { return prob_; }
  const TruncatedChain& chain() const { return *tc_; }
  double boundary_mass() const { return boundary_mass_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// E[prod (M_i)_{r_i} (L)_{r_0} 1{X = state}], r as in MultiIndex.
  double factorial_moment(const MultiIndex& r, std::size_t state) const;
  double factorial_moment(const MultiIndex& r) const;
  double mean(std::size_t node) const;
  /// P(M_i = m) for m = 0..cap_i.
  std::vector<double> marginal(std::size_t node) const;
  Vector background_law() const;
  /// sum_x p(x) * loss flow(x).
  double loss_rate() const;

 private:
  const TruncatedChain* tc_;
  Vector prob_;
  double boundary_mass_ = 0.0;
  std::vector<std::string> warnings_;
};

OracleDistribution oracle_stationary(const TruncatedChain& tc, const OracleOptions& opts = {});

/// Uniformization with total-variation truncation error below `tol`.
OracleDistribution oracle_transient(const TruncatedChain& tc, double t, const InitialCondition& init,
                                    const OracleOptions& opts = {}, double tol = 1e-10);

/// Max over grid points and background states of the residual of the
/// stationary generating-function equation (w = 1), with phi and its
/// gradient taken exactly from the pmf.
double pgf_residual(const OracleDistribution& dist, const std::vector<std::vector<double>>& z_grid);

/// Tensor grid with `points` equally spaced values in [0,1] per node.
std::vector<std::vector<double>> uniform_z_grid(std::size_t nodes, std::size_t points);

}  // namespace qnet
