#include "qnet/moments.hpp"

#include "qnet/errors.hpp"
#include "state_rates.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qnet {

namespace {

// Dense exponentials stay cheap up to this dimension; beyond it the sparse
// Taylor action is used.
constexpr Eigen::Index kDenseExpmLimit = 1200;

Vector propagate(const SparseMatrix& g, const Vector& y0, double t) {
  if (g.rows() <= kDenseExpmLimit) return expm(Matrix(g) * t) * y0;
  return expm_action(g, y0, t);
}

void check_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("time must be finite and non-negative");
}

double falling(unsigned m, unsigned r) {
  double p = 1.0;
  for (unsigned j = 0; j < r; ++j) p *= static_cast<double>(m) - j;
  return p;
}

double level_size(std::size_t coordinates, unsigned level) {
  // C(coordinates + level - 1, level)
  double c = 1.0;
  for (unsigned j = 1; j <= level; ++j) c = c * static_cast<double>(coordinates + j - 1) / j;
  return c;
}

void enumerate_into(std::size_t coordinates, unsigned level, MultiIndex& prefix_tail,
                    std::vector<MultiIndex>& out) {
  if (coordinates == 0) {
    if (level == 0) out.emplace_back(prefix_tail.rbegin(), prefix_tail.rend());
    return;
  }
  if (coordinates == 1) {
    prefix_tail.push_back(level);
    out.emplace_back(prefix_tail.rbegin(), prefix_tail.rend());
    prefix_tail.pop_back();
    return;
  }
  // prefix_tail holds the fixed trailing coordinates in reverse. Colex order
  // means the last free coordinate is the outer, slowest-varying loop.
  for (unsigned last = 0; last <= level; ++last) {
    prefix_tail.push_back(last);
    enumerate_into(coordinates - 1, level - last, prefix_tail, out);
    prefix_tail.pop_back();
  }
}

struct Levels {
  std::vector<std::vector<MultiIndex>> indices;
  std::vector<std::map<MultiIndex, std::size_t>> pos;
};

Levels build_levels(std::size_t nodes, std::size_t states, unsigned max_order, bool include_loss) {
  Levels lv;
  const std::size_t coords = include_loss ? nodes + 1 : nodes;
  for (unsigned l = 0; l <= max_order; ++l) {
    const double dim = level_size(coords, l) * static_cast<double>(states);
    if (dim > static_cast<double>(kMaxLevelDimension)) {
      throw CapacityError("moment level " + std::to_string(l) + " has dimension " +
                          std::to_string(static_cast<long long>(dim)) + ", above the limit of " +
                          std::to_string(kMaxLevelDimension));
    }
    std::vector<MultiIndex> raw = enumerate_level(coords, l);
    if (!include_loss) {
      for (auto& r : raw) r.insert(r.begin(), 0U);
    }
    std::map<MultiIndex, std::size_t> p;
    for (std::size_t a = 0; a < raw.size(); ++a) p.emplace(raw[a], a);
    lv.indices.push_back(std::move(raw));
    lv.pos.push_back(std::move(p));
  }
  return lv;
}

/// Emits the recursion for one level. `same(pos, k)` and `lower(pos, k)` map
/// a (multi-index position, state) to a column; rows use `same`.
template <typename SameCol, typename LowerCol, typename Emit>
void emit_level(const detail::StateRates& rates, const SparseMatrix& q, const ValidatedNetwork& net,
                const Levels& lv, unsigned l, SameCol same, LowerCol lower, Emit emit) {
  const std::size_t n = rates.nodes;
  const std::size_t states = rates.states;
  const auto& idx = lv.indices[l];
  const auto& pos = lv.pos[l];
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const MultiIndex& r = idx[a];
    for (std::size_t k = 0; k < states; ++k) {
      const auto row = same(a, k);
      double diag = 0.0;
      for (std::size_t i = 0; i < n; ++i) diag -= r[1 + i] * rates.decay_at(i, k);
      if (diag != 0.0) emit(row, row, diag);

      MultiIndex s = r;
      for (const auto& jump : rates.jumps[k]) {
        const unsigned rj = r[1 + jump.to];
        if (rj == 0) continue;
        s[1 + jump.to] -= 1;
        s[1 + jump.from] += 1;
        emit(row, same(pos.at(s), k), rj * jump.rate);
        s[1 + jump.to] += 1;
        s[1 + jump.from] -= 1;
      }
      if (r[0] > 0) {
        for (std::size_t i = 0; i < n; ++i) {
          const double lr = rates.loss_at(i, k);
          if (lr == 0.0) continue;
          s[0] -= 1;
          s[1 + i] += 1;
          emit(row, same(pos.at(s), k), r[0] * lr);
          s[0] += 1;
          s[1 + i] -= 1;
        }
      }
      if (l > 0) {
        const auto& lower_pos = lv.pos[l - 1];
        for (std::size_t i = 0; i < n; ++i) {
          const double lambda = net.lambda(i);
          if (r[1 + i] == 0 || lambda == 0.0) continue;
          s[1 + i] -= 1;
          emit(row, lower(lower_pos.at(s), k), r[1 + i] * lambda);
          s[1 + i] += 1;
        }
      }
    }
    // Background coupling: d psi_k / dt += sum_l q_lk psi_l.
    for (Eigen::Index c = 0; c < q.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(q, c); it; ++it) {
        const auto from = static_cast<std::size_t>(it.row());
        const auto to = static_cast<std::size_t>(it.col());
        emit(same(a, to), same(a, from), it.value());
      }
    }
  }
}

struct StackedSystem {
  SparseMatrix g;
  std::vector<Eigen::Index> offset;
  Levels lv;
};

StackedSystem stacked_system(const ValidatedNetwork& net, const BackgroundChain& chain, unsigned max_order,
                             bool include_loss) {
  const detail::StateRates rates(net);
  const std::size_t states = chain.state_count();
  StackedSystem sys{SparseMatrix(), {}, build_levels(net.node_count(), states, max_order, include_loss)};
  Eigen::Index total = 0;
  for (const auto& idx : sys.lv.indices) {
    sys.offset.push_back(total);
    total += static_cast<Eigen::Index>(idx.size() * states);
  }
  std::vector<Triplet> trip;
  for (unsigned l = 0; l <= max_order; ++l) {
    const Eigen::Index off = sys.offset[l];
    const Eigen::Index low = l > 0 ? sys.offset[l - 1] : 0;
    auto same = [&](std::size_t a, std::size_t k) { return off + static_cast<Eigen::Index>(a * states + k); };
    auto lower = [&](std::size_t a, std::size_t k) { return low + static_cast<Eigen::Index>(a * states + k); };
    emit_level(rates, chain.generator(), net, sys.lv, l, same, lower,
               [&](Eigen::Index r, Eigen::Index c, double v) { trip.emplace_back(r, c, v); });
  }
  sys.g.resize(total, total);
  sys.g.setFromTriplets(trip.begin(), trip.end());
  sys.g.makeCompressed();
  return sys;
}

Vector initial_stack(const StackedSystem& sys, const InitialCondition& init, const Vector& p0, std::size_t states) {
  Vector y = Vector::Zero(sys.g.rows());
  for (std::size_t l = 0; l < sys.lv.indices.size(); ++l) {
    const auto& idx = sys.lv.indices[l];
    for (std::size_t a = 0; a < idx.size(); ++a) {
      const MultiIndex& r = idx[a];
      if (r[0] != 0) continue;  // L(0) = 0
      double w = 1.0;
      for (std::size_t i = 0; i < init.counts.size(); ++i) w *= falling(init.counts[i], r[1 + i]);
      if (w == 0.0) continue;
      for (std::size_t k = 0; k < states; ++k) {
        y[sys.offset[l] + static_cast<Eigen::Index>(a * states + k)] = w * p0[static_cast<Eigen::Index>(k)];
      }
    }
  }
  return y;
}

MomentTable unstack(const StackedSystem& sys, const Vector& y, std::size_t nodes, std::size_t states,
                    bool include_loss, unsigned max_order, double t) {
  MomentTable table(nodes, states, include_loss, max_order, t);
  for (unsigned l = 0; l <= max_order; ++l) {
    Matrix& m = table.level_values(l);
    for (Eigen::Index a = 0; a < m.rows(); ++a) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) {
        m(a, k) = y[sys.offset[l] + a * static_cast<Eigen::Index>(states) + k];
      }
    }
  }
  return table;
}

void check_initial(const ValidatedNetwork& net, const BackgroundChain& chain, const InitialCondition& init) {
  if (init.counts.size() != net.node_count()) {
    throw std::invalid_argument("initial counts must list one value per node");
  }
  if (chain.state_count() != net.state_count()) {
    throw std::invalid_argument("background chain does not match the network's blocks");
  }
}

}  // namespace

Vector InitialCondition::background_law(const BackgroundChain& chain) const {
  if (!background) return chain.stationary();
  if (*background >= chain.state_count()) throw std::out_of_range("initial background state out of range");
  Vector p = Vector::Zero(static_cast<Eigen::Index>(chain.state_count()));
  p[static_cast<Eigen::Index>(*background)] = 1.0;
  return p;
}

namespace {

/// d v(i,k)/dt = lambda_i p_k + sum_j v(j,k) mu+_jik - v(i,k) decay(i,k) + sum_l v(i,l) q_lk,
/// stored with (i,k) -> i * states + k.
SparseMatrix first_moment_operator(const ValidatedNetwork& net, const BackgroundChain& chain) {
  const detail::StateRates rates(net);
  const std::size_t n = net.node_count();
  const std::size_t states = chain.state_count();
  std::vector<Triplet> trip;
  auto at = [&](std::size_t i, std::size_t k) { return static_cast<int>(i * states + k); };
  for (std::size_t k = 0; k < states; ++k) {
    for (std::size_t i = 0; i < n; ++i) trip.emplace_back(at(i, k), at(i, k), -rates.decay_at(i, k));
    for (const auto& jump : rates.jumps[k]) trip.emplace_back(at(jump.to, k), at(jump.from, k), jump.rate);
  }
  const SparseMatrix& q = chain.generator();
  for (Eigen::Index c = 0; c < q.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(q, c); it; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        trip.emplace_back(at(i, static_cast<std::size_t>(it.col())), at(i, static_cast<std::size_t>(it.row())),
                          it.value());
      }
    }
  }
  const auto dim = static_cast<Eigen::Index>(n * states);
  SparseMatrix a(dim, dim);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  return a;
}

}  // namespace

FirstMoments stationary_first_moments(const ValidatedNetwork& net, const BackgroundChain& chain) {
  const std::size_t n = net.node_count();
  const std::size_t states = chain.state_count();
  const SparseMatrix a = first_moment_operator(net, chain);
  Vector rhs(a.rows());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < states; ++k) {
      rhs[static_cast<Eigen::Index>(i * states + k)] = -net.lambda(i) * chain.stationary()[static_cast<Eigen::Index>(k)];
    }
  }
  const Vector x = solve_sparse(a, rhs, "stationary first moments");
  FirstMoments fm{Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(states))};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < states; ++k) fm.v(i, k) = x[static_cast<Eigen::Index>(i * states + k)];
  }
  return fm;
}

FirstMoments transient_first_moments(const ValidatedNetwork& net, const BackgroundChain& chain,
                                     const InitialCondition& init, double t) {
  check_time(t);
  check_initial(net, chain, init);
  const std::size_t n = net.node_count();
  const std::size_t states = chain.state_count();
  const SparseMatrix a = first_moment_operator(net, chain);
  const Eigen::Index nk = a.rows();
  const auto s = static_cast<Eigen::Index>(states);

  // Augmented state (v, p) with p' = Q^T p and the arrival forcing lambda_i p_k.
  std::vector<Triplet> trip;
  for (Eigen::Index c = 0; c < a.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(a, c); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (net.lambda(i) == 0.0) continue;
    for (Eigen::Index k = 0; k < s; ++k) trip.emplace_back(static_cast<Eigen::Index>(i) * s + k, nk + k, net.lambda(i));
  }
  const SparseMatrix& q = chain.generator();
  for (Eigen::Index c = 0; c < q.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(q, c); it; ++it) trip.emplace_back(nk + it.col(), nk + it.row(), it.value());
  }
  SparseMatrix g(nk + s, nk + s);
  g.setFromTriplets(trip.begin(), trip.end());

  const Vector p0 = init.background_law(chain);
  Vector y0(nk + s);
  for (std::size_t i = 0; i < n; ++i) y0.segment(static_cast<Eigen::Index>(i) * s, s) = init.counts[i] * p0;
  y0.tail(s) = p0;
  const Vector y = propagate(g, y0, t);

  FirstMoments fm{Matrix(static_cast<Eigen::Index>(n), s)};
  for (std::size_t i = 0; i < n; ++i) fm.v.row(static_cast<Eigen::Index>(i)) = y.segment(static_cast<Eigen::Index>(i) * s, s).transpose();
  return fm;
}

std::vector<MultiIndex> enumerate_level(std::size_t coordinates, unsigned level) {
  std::vector<MultiIndex> out;
  MultiIndex tail;
  enumerate_into(coordinates, level, tail, out);
  return out;
}

MomentTable::MomentTable(std::size_t nodes, std::size_t states, bool has_loss, unsigned max_order,
                         std::optional<double> time)
    : nodes_(nodes), states_(states), has_loss_(has_loss), max_order_(max_order), time_(time) {
  const std::size_t coords = has_loss ? nodes + 1 : nodes;
  for (unsigned l = 0; l <= max_order; ++l) {
    auto idx = enumerate_level(coords, l);
    if (!has_loss) {
      for (auto& r : idx) r.insert(r.begin(), 0U);
    }
    for (std::size_t a = 0; a < idx.size(); ++a) position_.emplace(idx[a], std::make_pair(l, a));
    values_.emplace_back(Matrix::Zero(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(states)));
    levels_.push_back(std::move(idx));
  }
}

double MomentTable::value(const MultiIndex& r, std::size_t state) const {
  const auto it = position_.find(r);
  if (it == position_.end()) throw std::out_of_range("multi-index not present in the moment table");
  if (state >= states_) throw std::out_of_range("background state out of range");
  return values_[it->second.first](static_cast<Eigen::Index>(it->second.second), static_cast<Eigen::Index>(state));
}

double MomentTable::total(const MultiIndex& r) const {
  const auto it = position_.find(r);
  if (it == position_.end()) throw std::out_of_range("multi-index not present in the moment table");
  return values_[it->second.first].row(static_cast<Eigen::Index>(it->second.second)).sum();
}

MultiIndex MomentTable::queue_index(std::initializer_list<unsigned> orders) const {
  if (orders.size() != nodes_) throw std::invalid_argument("queue_index needs one order per node");
  MultiIndex r{0U};
  r.insert(r.end(), orders.begin(), orders.end());
  return r;
}

MomentTable stationary_factorial_moments(const ValidatedNetwork& net, const BackgroundChain& chain,
                                         unsigned max_order) {
  if (chain.state_count() != net.state_count()) {
    throw std::invalid_argument("background chain does not match the network's blocks");
  }
  const detail::StateRates rates(net);
  const std::size_t states = chain.state_count();
  const Levels lv = build_levels(net.node_count(), states, max_order, false);
  MomentTable table(net.node_count(), states, false, max_order, std::nullopt);
  table.level_values(0).row(0) = chain.stationary().transpose();

  for (unsigned l = 1; l <= max_order; ++l) {
    const auto dim = static_cast<Eigen::Index>(lv.indices[l].size() * states);
    const Matrix& prev = table.level_values(l - 1);
    std::vector<Triplet> trip;
    Vector rhs = Vector::Zero(dim);
    auto same = [&](std::size_t a, std::size_t k) { return static_cast<Eigen::Index>(a * states + k); };
    // Lower-level columns are tagged by an offset past `dim` and folded into the rhs.
    auto lower = [&](std::size_t a, std::size_t k) { return dim + static_cast<Eigen::Index>(a * states + k); };
    emit_level(rates, chain.generator(), net, lv, l, same, lower, [&](Eigen::Index r, Eigen::Index c, double v) {
      if (c < dim) {
        trip.emplace_back(r, c, v);
      } else {
        const Eigen::Index flat = c - dim;
        const Eigen::Index s = static_cast<Eigen::Index>(states);
        rhs[r] -= v * prev(flat / s, flat % s);
      }
    });
    SparseMatrix a(dim, dim);
    a.setFromTriplets(trip.begin(), trip.end());
    const Vector x = solve_sparse(a, rhs, "stationary factorial moments, level " + std::to_string(l));
    Matrix& m = table.level_values(l);
    for (Eigen::Index a_idx = 0; a_idx < m.rows(); ++a_idx) {
      for (Eigen::Index k = 0; k < m.cols(); ++k) m(a_idx, k) = x[a_idx * static_cast<Eigen::Index>(states) + k];
    }
  }
  return table;
}

MomentTable transient_factorial_moments(const ValidatedNetwork& net, const BackgroundChain& chain,
                                        unsigned max_order, double t, const InitialCondition& init,
                                        bool include_loss) {
  check_time(t);
  check_initial(net, chain, init);
  const StackedSystem sys = stacked_system(net, chain, max_order, include_loss);
  const Vector y0 = initial_stack(sys, init, init.background_law(chain), chain.state_count());
  const Vector y = propagate(sys.g, y0, t);
  return unstack(sys, y, net.node_count(), chain.state_count(), include_loss, max_order, t);
}

MomentTable transient_factorial_moments_rk4(const ValidatedNetwork& net, const BackgroundChain& chain,
                                            unsigned max_order, double t, const InitialCondition& init,
                                            bool include_loss, double tol) {
  check_time(t);
  check_initial(net, chain, init);
  const StackedSystem sys = stacked_system(net, chain, max_order, include_loss);
  const Vector y0 = initial_stack(sys, init, init.background_law(chain), chain.state_count());

  double norm = 0.0;
  for (Eigen::Index r = 0; r < sys.g.rows(); ++r) norm = std::max(norm, sys.g.row(r).cwiseAbs().sum());
  auto integrate = [&](long steps) {
    const double h = t / static_cast<double>(steps);
    Vector y = y0;
    for (long s = 0; s < steps; ++s) {
      const Vector k1 = sys.g * y;
      const Vector k2 = sys.g * (y + 0.5 * h * k1);
      const Vector k3 = sys.g * (y + 0.5 * h * k2);
      const Vector k4 = sys.g * (y + h * k3);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
  };

  long steps = std::max(8L, static_cast<long>(std::ceil(norm * t)));
  Vector coarse = integrate(steps);
  for (int round = 0; round < 14; ++round) {
    steps *= 2;
    Vector fine = integrate(steps);
    const double scale = std::max(1.0, fine.lpNorm<Eigen::Infinity>());
    if ((fine - coarse).lpNorm<Eigen::Infinity>() <= tol * scale) {
      return unstack(sys, fine, net.node_count(), chain.state_count(), include_loss, max_order, t);
    }
    coarse = std::move(fine);
  }
  throw NumericalError("RK4 moment integration did not settle under step halving");
}

double loss_mean(const ValidatedNetwork& net, const BackgroundChain& chain, double t, const InitialCondition& init) {
  const MomentTable table = transient_factorial_moments(net, chain, 1, t, init, true);
  MultiIndex e0(net.node_count() + 1, 0U);
  e0[0] = 1;
  return table.total(e0);
}

CentralMoments central_moments(const MomentTable& table) {
  if (table.max_order() < 2) throw std::invalid_argument("central moments need factorial moments up to order 2");
  const std::size_t n = table.node_count();
  const auto ni = static_cast<Eigen::Index>(n);
  CentralMoments c{Vector(ni), Vector(ni), Matrix(ni, ni)};
  MultiIndex r(n + 1, 0U);
  for (std::size_t i = 0; i < n; ++i) {
    r[1 + i] = 1;
    c.mean[static_cast<Eigen::Index>(i)] = table.total(r);
    r[1 + i] = 0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      r[1 + i] += 1;
      r[1 + j] += 1;
      const double second = table.total(r);
      r[1 + i] -= 1;
      r[1 + j] -= 1;
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(j);
      double cov = second - c.mean[a] * c.mean[b];
      if (i == j) cov += c.mean[a];
      c.covariance(a, b) = cov;
      c.covariance(b, a) = cov;
    }
    c.variance[static_cast<Eigen::Index>(i)] = c.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
  }
  return c;
}

}  // namespace qnet
