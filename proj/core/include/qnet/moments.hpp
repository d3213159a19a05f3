#pragma once

#include "qnet/background.hpp"
#include "qnet/linalg.hpp"
#include "qnet/model.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

namespace qnet {

/// Deterministic start: counts per node and a background state, or the
/// stationary background law when `background` is empty.
struct InitialCondition {
  std::vector<unsigned> counts;
  std::optional<std::size_t> background;

  static InitialCondition empty(std::size_t nodes) { return {std::vector<unsigned>(nodes, 0U), std::nullopt}; }
  /// P(X(0) = k).
  Vector background_law(const BackgroundChain& chain) const;
};

/// v(i,k) = E[M_i 1{X = k}].
struct FirstMoments {
  Matrix v;  ///< n x states

  Vector means() const { return v.rowwise().sum(); }
};

FirstMoments stationary_first_moments(const ValidatedNetwork& net, const BackgroundChain& chain);
FirstMoments transient_first_moments(const ValidatedNetwork& net, const BackgroundChain& chain,
                                     const InitialCondition& init, double t);

/// r[0] is the order in the loss count, r[1..n] the orders in the queue lengths.
using MultiIndex = std::vector<unsigned>;

/// All r with r[0] + ... + r[d-1] == level (d = size), in colexicographic order:
/// r precedes s when, at the last coordinate where they differ, r is smaller.
std::vector<MultiIndex> enumerate_level(std::size_t coordinates, unsigned level);

/// Level dimension above which the recursion refuses to run.
inline constexpr std::size_t kMaxLevelDimension = 100000;

/// psi_k(r) = E[prod_i (M_i)_{r_i} (L)_{r_0} 1{X = k}] for every r up to
/// total order `max_order`. Level 0 holds P(X = k).
class MomentTable {
 public:
  MomentTable(std::size_t nodes, std::size_t states, bool has_loss, unsigned max_order, std::optional<double> time);

  std::size_t node_count() const { return nodes_; }
  std::size_t state_count() const { return states_; }
  bool has_loss() const { return has_loss_; }
  unsigned max_order() const { return max_order_; }
  /// Empty for stationary tables.
  std::optional<double> time() const { return time_; }

  const std::vector<MultiIndex>& level(unsigned l) const { return levels_.at(l); }
  const Matrix& level_values(unsigned l) const { return values_.at(l); }
  Matrix& level_values(unsigned l) { return values_.at(l); }

  bool contains(const MultiIndex& r) const { return position_.count(r) != 0; }
  double value(const MultiIndex& r, std::size_t state) const;
  /// Sum over background states.
  double total(const MultiIndex& r) const;

  /// Convenience: r with queue orders only (loss order 0).
  MultiIndex queue_index(std::initializer_list<unsigned> orders) const;

 private:
  std::size_t nodes_;
  std::size_t states_;
  bool has_loss_;
  unsigned max_order_;
  std::optional<double> time_;
  std::vector<std::vector<MultiIndex>> levels_;
  std::vector<Matrix> values_;  ///< per level: index count x states
  std::map<MultiIndex, std::pair<unsigned, std::size_t>> position_;
};

/// Stationary table. Loss moments grow without bound, so include_loss is rejected.
MomentTable stationary_factorial_moments(const ValidatedNetwork& net, const BackgroundChain& chain,
                                         unsigned max_order);

/// Transient table by one exponential of the block-triangular system over all levels.
MomentTable transient_factorial_moments(const ValidatedNetwork& net, const BackgroundChain& chain,
                                        unsigned max_order, double t, const InitialCondition& init,
                                        bool include_loss);

/// Same table by classical RK4, doubling the step count until two successive
/// answers agree to `tol` (relative to the largest entry).
MomentTable transient_factorial_moments_rk4(const ValidatedNetwork& net, const BackgroundChain& chain,
                                            unsigned max_order, double t, const InitialCondition& init,
                                            bool include_loss, double tol = 1e-9);

/// E L(t).
double loss_mean(const ValidatedNetwork& net, const BackgroundChain& chain, double t, const InitialCondition& init);

struct CentralMoments {
  Vector mean;
  Vector variance;
  Matrix covariance;
};

/// Needs levels 1 and 2.
CentralMoments central_moments(const MomentTable& table);

}  // namespace qnet
