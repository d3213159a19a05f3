#include "qnet/perf.hpp"

#include "qnet/errors.hpp"
#include "state_rates.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace qnet {

namespace {

struct TaggedChain {
  std::size_t n = 0;
  std::size_t states = 0;
  std::vector<double> sigma_eff;
  std::vector<double> loss;
  std::vector<std::vector<std::pair<std::size_t, double>>> next;  ///< off-diagonal rates to other (j,l)
};

TaggedChain tagged_chain(const ValidatedNetwork& net, const BackgroundChain& chain) {
  const detail::StateRates rates(net);
  TaggedChain tc;
  tc.n = net.node_count();
  tc.states = chain.state_count();
  const std::size_t dim = tc.n * tc.states;
  tc.sigma_eff.resize(dim);
  tc.loss.resize(dim);
  tc.next.resize(dim);
  const SparseMatrix& q = chain.generator();
  for (std::size_t i = 0; i < tc.n; ++i) {
    for (std::size_t k = 0; k < tc.states; ++k) {
      const std::size_t row = i * tc.states + k;
      tc.sigma_eff[row] = rates.decay_at(i, k) + chain.exit_rate(k);
      tc.loss[row] = rates.loss_at(i, k);
    }
  }
  for (std::size_t k = 0; k < tc.states; ++k) {
    for (const auto& jump : rates.jumps[k]) {
      tc.next[jump.from * tc.states + k].emplace_back(jump.to * tc.states + k, jump.rate);
    }
  }
  for (Eigen::Index c = 0; c < q.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(q, c); it; ++it) {
      if (it.row() == it.col()) continue;
      for (std::size_t i = 0; i < tc.n; ++i) {
        tc.next[i * tc.states + static_cast<std::size_t>(it.row())].emplace_back(
            i * tc.states + static_cast<std::size_t>(it.col()), it.value());
      }
    }
  }
  return tc;
}

}  // namespace

LossMetrics loss_metrics(const ValidatedNetwork& net, const BackgroundChain& chain) {
  if (chain.state_count() != net.state_count()) {
    throw std::invalid_argument("background chain does not match the network's blocks");
  }
  const TaggedChain tc = tagged_chain(net, chain);
  const std::size_t dim = tc.n * tc.states;

  // Row-wise dominance: sigma_eff >= off-diagonal mass always; rows where the
  // client can leave the chain (exit or loss) are strictly dominant.
  std::vector<bool> strict(dim, false);
  for (std::size_t r = 0; r < dim; ++r) {
    double off = 0.0;
    for (const auto& [c, v] : tc.next[r]) off += v;
    const double slack = tc.sigma_eff[r] - off;
    const double tol = 1e-12 * std::max(1.0, tc.sigma_eff[r]);
    if (slack < -tol) {
      throw NumericalError("loss system row " + std::to_string(r) + " is not diagonally dominant (slack " +
                           std::to_string(slack) + ")");
    }
    strict[r] = slack > tol;
  }
  // Rows that cannot reach a strictly dominant row never leave the network:
  // they are fixed at omega = tau = 0 and dropped from the solve.
  std::vector<std::vector<std::size_t>> incoming(dim);
  for (std::size_t r = 0; r < dim; ++r) {
    for (const auto& [c, v] : tc.next[r]) {
      if (v > 0.0) incoming[c].push_back(r);
    }
  }
  std::vector<bool> absorbing(dim, false);
  std::vector<std::size_t> stack;
  for (std::size_t r = 0; r < dim; ++r) {
    if (strict[r]) {
      absorbing[r] = true;
      stack.push_back(r);
    }
  }
  while (!stack.empty()) {
    const std::size_t c = stack.back();
    stack.pop_back();
    for (std::size_t r : incoming[c]) {
      if (!absorbing[r]) {
        absorbing[r] = true;
        stack.push_back(r);
      }
    }
  }
  std::vector<Eigen::Index> slot(dim, -1);
  Eigen::Index m = 0;
  for (std::size_t r = 0; r < dim; ++r) {
    if (absorbing[r]) slot[r] = m++;
  }

  Vector omega_flat = Vector::Zero(static_cast<Eigen::Index>(dim));
  Vector tau_flat = Vector::Zero(static_cast<Eigen::Index>(dim));
  if (m > 0) {
    std::vector<Triplet> trip;
    Vector rhs(m);
    for (std::size_t r = 0; r < dim; ++r) {
      if (slot[r] < 0) continue;
      trip.emplace_back(slot[r], slot[r], tc.sigma_eff[r]);
      for (const auto& [c, v] : tc.next[r]) {
        if (slot[c] >= 0) trip.emplace_back(slot[r], slot[c], -v);
      }
      rhs[slot[r]] = tc.loss[r];
    }
    SparseMatrix a(m, m);
    a.setFromTriplets(trip.begin(), trip.end());
    const Vector omega = solve_sparse(a, rhs, "loss probability");
    const Vector tau = solve_sparse(a, omega, "mean time to loss");
    for (std::size_t r = 0; r < dim; ++r) {
      if (slot[r] < 0) continue;
      omega_flat[static_cast<Eigen::Index>(r)] = omega[slot[r]];
      tau_flat[static_cast<Eigen::Index>(r)] = tau[slot[r]];
    }
  }

  const auto n = static_cast<Eigen::Index>(tc.n);
  const auto s = static_cast<Eigen::Index>(tc.states);
  LossMetrics out{Matrix(n, s), Matrix(n, s), Matrix(n, s), 0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < s; ++k) {
      out.omega(i, k) = omega_flat[i * s + k];
      out.tau(i, k) = tau_flat[i * s + k];
      out.sigma(i, k) = net.mu_total(static_cast<std::size_t>(i)) + chain.exit_rate(static_cast<std::size_t>(k));
    }
  }
  const double lambda_bar = net.total_arrival_rate();
  if (lambda_bar > 0.0) {
    const Vector& pi = chain.stationary();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = net.lambda(static_cast<std::size_t>(i)) / lambda_bar;
      out.omega_agg += w * out.omega.row(i).dot(pi);
      out.tau_agg += w * out.tau.row(i).dot(pi);
    }
  }
  return out;
}

Matrix loss_probability(const ValidatedNetwork& net, const BackgroundChain& chain) {
  return loss_metrics(net, chain).omega;
}

Matrix mean_time_to_loss(const ValidatedNetwork& net, const BackgroundChain& chain) {
  return loss_metrics(net, chain).tau;
}

}  // namespace qnet
