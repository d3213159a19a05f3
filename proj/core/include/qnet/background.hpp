#pragma once

#include "qnet/linalg.hpp"
#include "qnet/model.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace qnet {

/// Two-state generator of one block, states ordered (down, up).
struct BlockRates {
  double q0 = 1.0;  ///< down -> up
  double q1 = 1.0;  ///< up -> down

  double total() const { return q0 + q1; }
  double up_probability() const { return q0 / (q0 + q1); }
};

/// Dense states are capped here; larger chains are only usable through the
/// sparse generator and the product-form vectors.
inline constexpr std::size_t kMaxDenseStates = 4096;

/// Sum_k I_{2^{k-1}} (x) Q^(k) (x) I_{2^{K-k}}, assembled with Kronecker products.
SparseMatrix kronecker_sum_generator(std::span<const BlockRates> blocks);

/// Same generator enumerated directly as single-bit flips.
SparseMatrix bit_flip_generator(std::span<const BlockRates> blocks);

/// pi_l = prod_{m up in l} pi^(m) * prod_{m down in l} (1 - pi^(m)).
Vector stationary_product_form(std::span<const BlockRates> blocks);

/// Stationary law of an irreducible dense generator via a linear solve of
/// pi Q = 0 with one equation replaced by normalization.
Vector stationary_nullspace(const Matrix& q);

/// D = (Pi - Q)^{-1} - Pi with Pi = 1 pi.
Matrix deviation_matrix(const Matrix& q, const Vector& pi);

/// diag(pi) D + D^T diag(pi).
Matrix fclt_sigma(const Vector& pi, const Matrix& deviation);

/// The 2^K-state modulating chain of independent blocks. Immutable.
class BackgroundChain {
 public:
  explicit BackgroundChain(std::vector<BlockRates> blocks);
  static BackgroundChain from_network(const ValidatedNetwork& net);

  std::size_t block_count() const { return blocks_.size(); }
  std::size_t state_count() const { return std::size_t{1} << blocks_.size(); }
  const std::vector<BlockRates>& blocks() const { return blocks_; }

  const SparseMatrix& generator() const { return q_; }
  Matrix generator_dense() const;
  const Vector& stationary() const { return pi_; }
  /// q_k = -q_kk.
  double exit_rate(std::size_t state) const { return -q_.coeff(state, state); }
  bool is_up(std::size_t block, std::size_t state) const {
    return block_up(block, state, blocks_.size());
  }
  /// Smallest nonzero decay rate of P(t) - Pi, i.e. min_m q^(m); +inf for K = 0.
  double spectral_gap() const;

  /// Product-form P(t).
  Matrix transition_matrix(double t) const;
  /// exp(Qt), independent of the product form.
  Matrix transition_matrix_expm(double t) const;
  /// Row `from` of P(t) by the product form.
  Vector transition_row(std::size_t from, double t) const;

  Matrix deviation_matrix() const;
  Matrix fclt_sigma() const;

  /// Chain with every block rate multiplied by `factor`.
  BackgroundChain scaled(double factor) const;

 private:
  void require_dense(const char* what) const;

  std::vector<BlockRates> blocks_;
  SparseMatrix q_;
  Vector pi_;
};

}  // namespace qnet
