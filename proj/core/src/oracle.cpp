#include "qnet/oracle.hpp"

#include "qnet/errors.hpp"
#include "state_rates.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace qnet {

TruncatedChain::TruncatedChain(const ValidatedNetwork& net, const BackgroundChain& chain, std::vector<unsigned> caps,
                               std::optional<unsigned> loss_cap)
    : net_(net), caps_(std::move(caps)), loss_cap_(loss_cap), states_(chain.state_count()), pi_(chain.stationary()) {
  const std::size_t n = net.node_count();
  if (caps_.size() != n) throw std::invalid_argument("oracle needs one cap per node");
  if (chain.state_count() != net.state_count()) {
    throw std::invalid_argument("background chain does not match the network's blocks");
  }
  double total = static_cast<double>(states_);
  stride_.resize(n + 1);
  std::size_t stride = states_;
  for (std::size_t i = 0; i < n; ++i) {
    stride_[i] = stride;
    stride *= caps_[i] + 1;
    total *= caps_[i] + 1.0;
  }
  stride_[n] = stride;
  if (loss_cap_) total *= *loss_cap_ + 1.0;
  if (total > static_cast<double>(kMaxOracleStates)) {
    throw CapacityError("truncated chain would have " + std::to_string(static_cast<long long>(total)) +
                        " states, above the limit of " + std::to_string(kMaxOracleStates));
  }
  const auto size = static_cast<std::size_t>(total);

  const detail::StateRates rates(net);
  const SparseMatrix& q = chain.generator();
  std::vector<std::vector<std::pair<std::size_t, double>>> flips(states_);
  for (Eigen::Index c = 0; c < q.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(q, c); it; ++it) {
      if (it.row() != it.col()) flips[static_cast<std::size_t>(it.row())].emplace_back(static_cast<std::size_t>(it.col()), it.value());
    }
  }

  std::vector<Triplet> trip;
  trip.reserve(size * (2 * n + 2 + chain.block_count()));
  loss_flow_.assign(size, 0.0);
  std::vector<unsigned> m(n, 0U);
  for (std::size_t x = 0; x < size; ++x) {
    const std::size_t k = x % states_;
    for (std::size_t i = 0; i < n; ++i) m[i] = count(x, i);
    const unsigned lost = loss_cap_ ? loss(x) : 0U;
    double out = 0.0;
    auto add = [&](std::size_t to, double rate) {
      if (rate <= 0.0) return;
      out += rate;
      if (to != x) trip.emplace_back(static_cast<int>(x), static_cast<int>(to), rate);
    };
    for (std::size_t i = 0; i < n; ++i) {
      if (m[i] < caps_[i]) add(x + stride_[i], net.lambda(i));
    }
    for (const auto& jump : rates.jumps[k]) {
      const unsigned mi = m[jump.from];
      if (mi == 0) continue;
      const std::size_t src = x - stride_[jump.from];
      add(m[jump.to] < caps_[jump.to] ? src + stride_[jump.to] : src, mi * jump.rate);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (m[i] == 0) continue;
      const std::size_t src = x - stride_[i];
      add(src, m[i] * net.mu_exit(i));
      const double lr = m[i] * rates.loss_at(i, k);
      loss_flow_[x] += lr;
      add(loss_cap_ && lost < *loss_cap_ ? src + stride_[n] : src, lr);
    }
    for (const auto& [to, rate] : flips[k]) add(x - k + to, rate);
    trip.emplace_back(static_cast<int>(x), static_cast<int>(x), -out);
  }
  generator_.resize(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  generator_.setFromTriplets(trip.begin(), trip.end());
  generator_.makeCompressed();
}

std::size_t TruncatedChain::index(const std::vector<unsigned>& counts, unsigned lost, std::size_t state) const {
  if (counts.size() != caps_.size()) throw std::invalid_argument("count vector has the wrong length");
  if (state >= states_) throw std::out_of_range("background state out of range");
  std::size_t x = state;
  for (std::size_t i = 0; i < caps_.size(); ++i) {
    if (counts[i] > caps_[i]) throw std::out_of_range("count exceeds the oracle cap");
    x += counts[i] * stride_[i];
  }
  if (lost > 0) {
    if (!loss_cap_ || lost > *loss_cap_) throw std::out_of_range("loss count not representable");
    x += lost * stride_[caps_.size()];
  }
  return x;
}

unsigned TruncatedChain::count(std::size_t flat, std::size_t node) const {
  return static_cast<unsigned>((flat / stride_[node]) % (caps_[node] + 1));
}

unsigned TruncatedChain::loss(std::size_t flat) const {
  return loss_cap_ ? static_cast<unsigned>(flat / stride_[caps_.size()]) : 0U;
}

bool TruncatedChain::on_boundary(std::size_t flat) const {
  for (std::size_t i = 0; i < caps_.size(); ++i) {
    if (count(flat, i) == caps_[i]) return true;
  }
  return loss_cap_ && loss(flat) == *loss_cap_;
}

OracleDistribution::OracleDistribution(const TruncatedChain& tc, Vector prob, const OracleOptions& opts)
    : tc_(&tc), prob_(std::move(prob)) {
  for (Eigen::Index x = 0; x < prob_.size(); ++x) {
    if (tc.on_boundary(static_cast<std::size_t>(x))) boundary_mass_ += prob_[x];
  }
  if (boundary_mass_ > opts.max_boundary && opts.strict) {
    throw NumericalError("oracle truncation too tight: boundary mass " + std::to_string(boundary_mass_));
  }
  if (boundary_mass_ > opts.warn_boundary) {
    std::ostringstream msg;
    msg << "boundary mass " << boundary_mass_ << " exceeds " << opts.warn_boundary << "; raise the caps";
    warnings_.push_back(msg.str());
  }
}

double OracleDistribution::factorial_moment(const MultiIndex& r, std::size_t state) const {
  const std::size_t n = tc_->node_count();
  if (r.size() != n + 1) throw std::invalid_argument("multi-index has the wrong length");
  if (r[0] > 0 && !tc_->tracks_loss()) throw std::invalid_argument("loss moments need a chain that tracks losses");
  const std::size_t states = tc_->background_states();
  double s = 0.0;
  for (Eigen::Index x = static_cast<Eigen::Index>(state); x < prob_.size(); x += static_cast<Eigen::Index>(states)) {
    const double p = prob_[x];
    if (p == 0.0) continue;
    double w = 1.0;
    const unsigned lost = tc_->loss(static_cast<std::size_t>(x));
    for (unsigned j = 0; j < r[0]; ++j) w *= static_cast<double>(lost) - j;
    for (std::size_t i = 0; i < n && w != 0.0; ++i) {
      const unsigned m = tc_->count(static_cast<std::size_t>(x), i);
      for (unsigned j = 0; j < r[1 + i]; ++j) w *= static_cast<double>(m) - j;
    }
    s += p * w;
  }
  return s;
}

double OracleDistribution::factorial_moment(const MultiIndex& r) const {
  double s = 0.0;
  for (std::size_t k = 0; k < tc_->background_states(); ++k) s += factorial_moment(r, k);
  return s;
}

double OracleDistribution::mean(std::size_t node) const {
  MultiIndex r(tc_->node_count() + 1, 0U);
  r.at(1 + node) = 1;
  return factorial_moment(r);
}

std::vector<double> OracleDistribution::marginal(std::size_t node) const {
  std::vector<double> out(tc_->caps().at(node) + 1, 0.0);
  for (Eigen::Index x = 0; x < prob_.size(); ++x) out[tc_->count(static_cast<std::size_t>(x), node)] += prob_[x];
  return out;
}

Vector OracleDistribution::background_law() const {
  Vector law = Vector::Zero(static_cast<Eigen::Index>(tc_->background_states()));
  for (Eigen::Index x = 0; x < prob_.size(); ++x) law[static_cast<Eigen::Index>(tc_->state(static_cast<std::size_t>(x)))] += prob_[x];
  return law;
}

double OracleDistribution::loss_rate() const {
  double s = 0.0;
  for (Eigen::Index x = 0; x < prob_.size(); ++x) s += prob_[x] * tc_->loss_flow(static_cast<std::size_t>(x));
  return s;
}

namespace {

/// Direct LU fill grows badly on 3-node lattices, so large systems go through
/// BiCGSTAB with an incomplete-LU preconditioner. The answer is accepted only
/// when its own residual is at rounding level; otherwise the preconditioner is
/// tightened, and small systems finally fall back to sparse LU.
Vector solve_pinned(const SparseMatrix& a, const Vector& rhs) {
  constexpr Eigen::Index kDirectLimit = 20000;
  if (a.rows() <= kDirectLimit) return solve_sparse(a, rhs, "oracle stationary law");
  const double scale = std::max(1.0, a.coeffs().cwiseAbs().maxCoeff());
  for (auto [droptol, fill] : {std::pair{1e-2, 4}, {1e-4, 10}}) {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>> solver;
    solver.preconditioner().setDroptol(droptol);
    solver.preconditioner().setFillfactor(fill);
    solver.setTolerance(1e-15);
    solver.setMaxIterations(1000);
    solver.compute(a);
    if (solver.info() != Eigen::Success) continue;
    Vector x = solver.solve(rhs);
    if (!x.allFinite()) continue;
    const double residual = (a * x - rhs).lpNorm<Eigen::Infinity>();
    if (residual <= 1e-13 * scale * std::max(1.0, x.lpNorm<Eigen::Infinity>())) return x;
  }
  throw NumericalError("oracle stationary law: iterative solve did not reach rounding-level residual (" +
                       std::to_string(a.rows()) + " states)");
}

}  // namespace

OracleDistribution oracle_stationary(const TruncatedChain& tc, const OracleOptions& opts) {
  if (tc.tracks_loss()) throw std::invalid_argument("the loss count has no stationary law; build the chain without it");
  const auto& g = tc.generator();
  const Eigen::Index size = g.rows();
  // G^T p = 0 with the first equation replaced by p_0 = 1, then normalized.
  // A row of ones would do the same job but fills the LU factors completely.
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(g.nonZeros() + 1));
  for (Eigen::Index r = 0; r < g.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(g, r); it; ++it) {
      if (it.col() != 0) trip.emplace_back(it.col(), it.row(), it.value());
    }
  }
  trip.emplace_back(0, 0, 1.0);
  SparseMatrix a(size, size);
  a.setFromTriplets(trip.begin(), trip.end());
  Vector rhs = Vector::Zero(size);
  rhs[0] = 1.0;
  Vector p = solve_pinned(a, rhs);
  // Round-off can leave tiny negatives.
  p = p.cwiseMax(0.0);
  p /= p.sum();
  return OracleDistribution(tc, std::move(p), opts);
}

OracleDistribution oracle_transient(const TruncatedChain& tc, double t, const InitialCondition& init,
                                    const OracleOptions& opts, double tol) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("time must be finite and non-negative");
  const auto& g = tc.generator();
  const Eigen::Index size = g.rows();
  Vector p0 = Vector::Zero(size);
  if (init.background) {
    p0[static_cast<Eigen::Index>(tc.index(init.counts, 0, *init.background))] = 1.0;
  } else {
    for (std::size_t k = 0; k < tc.background_states(); ++k) {
      p0[static_cast<Eigen::Index>(tc.index(init.counts, 0, k))] = tc.background_stationary()[static_cast<Eigen::Index>(k)];
    }
  }

  double rate = 0.0;
  for (Eigen::Index r = 0; r < size; ++r) rate = std::max(rate, -g.coeff(r, r));
  if (t == 0.0 || rate == 0.0) return OracleDistribution(tc, p0, opts);

  const Eigen::SparseMatrix<double> gt = g.transpose();
  const double lt = rate * t;
  Vector v = p0;
  Vector acc = Vector::Zero(size);
  double mass = 0.0;
  for (long n = 0;; ++n) {
    const double w = std::exp(-lt + static_cast<double>(n) * std::log(lt) - std::lgamma(static_cast<double>(n) + 1.0));
    acc += w * v;
    mass += w;
    if (static_cast<double>(n) > lt && 1.0 - mass < tol) break;
    if (n > 100'000'000) throw NumericalError("uniformization did not converge");
    v += (gt * v) / rate;
  }
  return OracleDistribution(tc, std::move(acc), opts);
}

double pgf_residual(const OracleDistribution& dist, const std::vector<std::vector<double>>& z_grid) {
  const TruncatedChain& tc = dist.chain();
  if (tc.tracks_loss()) throw std::invalid_argument("residual is defined for chains without the loss count");
  const ValidatedNetwork& net = tc.network();
  const detail::StateRates rates(net);
  const std::size_t n = tc.node_count();
  const std::size_t states = tc.background_states();
  const BackgroundChain chain = BackgroundChain::from_network(net);
  const Matrix q = Matrix(chain.generator());
  const Vector& p = dist.probabilities();

  double worst = 0.0;
  std::vector<std::vector<double>> pw(n), dpw(n);
  for (const auto& z : z_grid) {
    if (z.size() != n) throw std::invalid_argument("grid point has the wrong dimension");
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned cap = tc.caps()[i];
      pw[i].assign(cap + 1, 1.0);
      dpw[i].assign(cap + 1, 0.0);
      for (unsigned m = 1; m <= cap; ++m) {
        pw[i][m] = pw[i][m - 1] * z[i];
        dpw[i][m] = m * pw[i][m - 1];
      }
    }
    Vector phi = Vector::Zero(static_cast<Eigen::Index>(states));
    Matrix grad = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(states));
    for (Eigen::Index x = 0; x < p.size(); ++x) {
      if (p[x] == 0.0) continue;
      const auto k = static_cast<Eigen::Index>(tc.state(static_cast<std::size_t>(x)));
      double mono = 1.0;
      for (std::size_t i = 0; i < n; ++i) mono *= pw[i][tc.count(static_cast<std::size_t>(x), i)];
      phi[k] += p[x] * mono;
      for (std::size_t i = 0; i < n; ++i) {
        double d = dpw[i][tc.count(static_cast<std::size_t>(x), i)];
        if (d == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i) d *= pw[j][tc.count(static_cast<std::size_t>(x), j)];
        }
        grad(static_cast<Eigen::Index>(i), k) += p[x] * d;
      }
    }
    for (std::size_t k = 0; k < states; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      double res = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        res += net.lambda(i) * (z[i] - 1.0) * phi[kk];
        double coeff = (net.mu_exit(i) + rates.loss_at(i, k)) * (1.0 - z[i]);
        for (const auto& jump : rates.jumps[k]) {
          if (jump.from == i) coeff += jump.rate * (z[jump.to] - z[i]);
        }
        res += coeff * grad(ii, kk);
      }
      for (std::size_t l = 0; l < states; ++l) res += q(static_cast<Eigen::Index>(l), kk) * phi[static_cast<Eigen::Index>(l)];
      worst = std::max(worst, std::abs(res));
    }
  }
  return worst;
}

std::vector<std::vector<double>> uniform_z_grid(std::size_t nodes, std::size_t points) {
  if (points < 2) throw std::invalid_argument("grid needs at least two points per axis");
  std::vector<std::vector<double>> grid{{}};
  for (std::size_t i = 0; i < nodes; ++i) {
    std::vector<std::vector<double>> next;
    for (const auto& g : grid) {
      for (std::size_t a = 0; a < points; ++a) {
        auto h = g;
        h.push_back(static_cast<double>(a) / static_cast<double>(points - 1));
        next.push_back(std::move(h));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

}  // namespace qnet
