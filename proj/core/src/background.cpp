#include "qnet/background.hpp"

#include "qnet/errors.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qnet {

namespace {

SparseMatrix sparse_identity(Eigen::Index n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

SparseMatrix block_generator(const BlockRates& b) {
  SparseMatrix q(2, 2);
  std::vector<Triplet> t{{0, 0, -b.q0}, {0, 1, b.q0}, {1, 0, b.q1}, {1, 1, -b.q1}};
  q.setFromTriplets(t.begin(), t.end());
  return q;
}

void check_blocks(std::span<const BlockRates> blocks) {
  if (blocks.size() > kMaxBlocks) throw CapacityError("more than 16 blocks");
  for (const auto& b : blocks) {
    if (!(b.q0 > 0.0 && b.q1 > 0.0)) throw std::invalid_argument("block rates must be positive");
  }
}

}  // namespace

SparseMatrix kronecker_sum_generator(std::span<const BlockRates> blocks) {
  check_blocks(blocks);
  const std::size_t k_count = blocks.size();
  const auto states = static_cast<Eigen::Index>(std::size_t{1} << k_count);
  SparseMatrix q(states, states);
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto left = static_cast<Eigen::Index>(std::size_t{1} << k);
    const auto right = static_cast<Eigen::Index>(std::size_t{1} << (k_count - k - 1));
    SparseMatrix inner = Eigen::kroneckerProduct(block_generator(blocks[k]), sparse_identity(right));
    SparseMatrix term = Eigen::kroneckerProduct(sparse_identity(left), inner);
    q += term;
  }
  if (k_count == 0) q.resize(1, 1);
  q.makeCompressed();
  return q;
}

SparseMatrix bit_flip_generator(std::span<const BlockRates> blocks) {
  check_blocks(blocks);
  const std::size_t k_count = blocks.size();
  const std::size_t states = std::size_t{1} << k_count;
  std::vector<Triplet> t;
  t.reserve(states * (k_count + 1));
  for (std::size_t s = 0; s < states; ++s) {
    double out = 0.0;
    for (std::size_t b = 0; b < k_count; ++b) {
      const std::size_t bit = std::size_t{1} << (k_count - 1 - b);
      const bool up = (s & bit) != 0;
      const double rate = up ? blocks[b].q1 : blocks[b].q0;
      t.emplace_back(static_cast<int>(s), static_cast<int>(s ^ bit), rate);
      out += rate;
    }
    t.emplace_back(static_cast<int>(s), static_cast<int>(s), -out);
  }
  SparseMatrix q(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(states));
  q.setFromTriplets(t.begin(), t.end());
  q.makeCompressed();
  return q;
}

Vector stationary_product_form(std::span<const BlockRates> blocks) {
  const std::size_t k_count = blocks.size();
  const std::size_t states = std::size_t{1} << k_count;
  Vector pi(static_cast<Eigen::Index>(states));
  for (std::size_t s = 0; s < states; ++s) {
    double p = 1.0;
    for (std::size_t b = 0; b < k_count; ++b) {
      const double up = blocks[b].up_probability();
      p *= block_up(b, s, k_count) ? up : 1.0 - up;
    }
    pi[static_cast<Eigen::Index>(s)] = p;
  }
  return pi;
}

Vector stationary_nullspace(const Matrix& q) {
  const auto n = q.rows();
  // pi Q = 0  <=>  Q^T pi^T = 0; replace the last equation with sum(pi) = 1.
  Matrix a = q.transpose();
  a.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  return solve_dense(a, rhs, "stationary law");
}

Matrix deviation_matrix(const Matrix& q, const Vector& pi) {
  const auto n = q.rows();
  const Matrix big_pi = Vector::Ones(n) * pi.transpose();
  const Matrix fundamental = solve_dense(big_pi - q, Matrix::Identity(n, n), "deviation matrix");
  return fundamental - big_pi;
}

Matrix fclt_sigma(const Vector& pi, const Matrix& deviation) {
  const Matrix dp = pi.asDiagonal() * deviation;
  return dp + dp.transpose();
}

BackgroundChain::BackgroundChain(std::vector<BlockRates> blocks)
    : blocks_(std::move(blocks)),
      q_(kronecker_sum_generator(blocks_)),
      pi_(stationary_product_form(blocks_)) {}

BackgroundChain BackgroundChain::from_network(const ValidatedNetwork& net) {
  std::vector<BlockRates> rates;
  rates.reserve(net.block_count());
  for (const auto& b : net.blocks()) rates.push_back(BlockRates{b.q0, b.q1});
  return BackgroundChain(std::move(rates));
}

void BackgroundChain::require_dense(const char* what) const {
  if (state_count() > kMaxDenseStates) {
    throw CapacityError(std::string(what) + ": " + std::to_string(state_count()) +
                        " background states exceed the dense limit of " + std::to_string(kMaxDenseStates));
  }
}

Matrix BackgroundChain::generator_dense() const {
  require_dense("generator");
  return Matrix(q_);
}

double BackgroundChain::spectral_gap() const {
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks_) gap = std::min(gap, b.total());
  return gap;
}

Vector BackgroundChain::transition_row(std::size_t from, double t) const {
  if (t < 0.0) throw std::invalid_argument("transition time must be non-negative");
  if (from >= state_count()) throw std::out_of_range("background state out of range");
  const std::size_t k_count = blocks_.size();
  // Per block, the probabilities of ending down / up given the start bit.
  std::vector<double> end_up(k_count);
  for (std::size_t b = 0; b < k_count; ++b) {
    const double pi = blocks_[b].up_probability();
    const double decay = std::exp(-blocks_[b].total() * t);
    end_up[b] = is_up(b, from) ? pi + (1.0 - pi) * decay : pi - pi * decay;
  }
  Vector row(static_cast<Eigen::Index>(state_count()));
  for (std::size_t to = 0; to < state_count(); ++to) {
    double p = 1.0;
    for (std::size_t b = 0; b < k_count; ++b) p *= is_up(b, to) ? end_up[b] : 1.0 - end_up[b];
    row[static_cast<Eigen::Index>(to)] = p;
  }
  return row;
}

Matrix BackgroundChain::transition_matrix(double t) const {
  require_dense("transition matrix");
  const auto n = static_cast<Eigen::Index>(state_count());
  Matrix p(n, n);
  for (Eigen::Index k = 0; k < n; ++k) p.row(k) = transition_row(static_cast<std::size_t>(k), t).transpose();
  return p;
}

Matrix BackgroundChain::transition_matrix_expm(double t) const {
  if (t < 0.0) throw std::invalid_argument("transition time must be non-negative");
  require_dense("transition matrix");
  return expm(generator_dense() * t);
}

Matrix BackgroundChain::deviation_matrix() const {
  require_dense("deviation matrix");
  return qnet::deviation_matrix(generator_dense(), pi_);
}

Matrix BackgroundChain::fclt_sigma() const { return qnet::fclt_sigma(pi_, deviation_matrix()); }

BackgroundChain BackgroundChain::scaled(double factor) const {
  std::vector<BlockRates> b = blocks_;
  for (auto& r : b) {
    r.q0 *= factor;
    r.q1 *= factor;
  }
  return BackgroundChain(std::move(b));
}

}  // namespace qnet
