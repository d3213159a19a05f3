#include "qnet/sim.hpp"

#include "qnet/errors.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace qnet {

namespace {

struct OutLink {
  std::size_t to;
  double mu;
  double f;
  std::optional<std::size_t> block;
};

/// Rates the event loop needs, flattened once per run.
struct Plan {
  std::size_t n = 0;
  std::size_t blocks = 0;
  std::vector<double> lambda;  ///< already scaled by N
  double lambda_total = 0.0;
  std::vector<double> mu_total;
  std::vector<double> mu_exit;
  std::vector<std::vector<OutLink>> out;
  std::vector<double> q0;  ///< scaled by N^alpha
  std::vector<double> q1;
  std::vector<double> pi_up;

  Plan(const ValidatedNetwork& net, double n_scale, double alpha)
      : n(net.node_count()), blocks(net.block_count()) {
    const double qscale = std::pow(n_scale, alpha);
    for (std::size_t i = 0; i < n; ++i) {
      lambda.push_back(n_scale * net.lambda(i));
      lambda_total += lambda.back();
      mu_total.push_back(net.mu_total(i));
      mu_exit.push_back(net.mu_exit(i));
      std::vector<OutLink> links;
      for (std::size_t li : net.out_links(i)) {
        const auto& l = net.links()[li];
        links.push_back(OutLink{l.to, l.mu, l.f, l.block});
      }
      out.push_back(std::move(links));
    }
    for (const auto& b : net.blocks()) {
      q0.push_back(qscale * b.q0);
      q1.push_back(qscale * b.q1);
      pi_up.push_back(b.q0 / (b.q0 + b.q1));
    }
  }

  bool up(std::size_t block, std::uint32_t state) const { return block_up(block, state, blocks); }
  bool link_up(const OutLink& l, std::uint32_t state) const { return !l.block || up(*l.block, state); }
  double flip_rate(std::uint32_t state) const {
    double s = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) s += up(b, state) ? q1[b] : q0[b];
    return s;
  }
  std::uint32_t flip(std::uint32_t state, double u) const {
    for (std::size_t b = 0; b < blocks; ++b) {
      const double r = up(b, state) ? q1[b] : q0[b];
      if (u < r || b + 1 == blocks) return state ^ (std::uint32_t{1} << (blocks - 1 - b));
      u -= r;
    }
    return state;
  }
  std::uint32_t draw_stationary(std::mt19937_64& eng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uint32_t s = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
      if (unif(eng) < pi_up[b]) s |= std::uint32_t{1} << (blocks - 1 - b);
    }
    return s;
  }
};

enum class Outcome { Exit, Move, Lost, Retry };

/// Resolves one service completion at node i: u in [0, mu_i).
Outcome resolve_service(const Plan& plan, std::size_t i, std::uint32_t state, double u, double u_loss,
                        std::size_t& dest) {
  if (u < plan.mu_exit[i]) return Outcome::Exit;
  u -= plan.mu_exit[i];
  const auto& links = plan.out[i];
  for (std::size_t a = 0; a < links.size(); ++a) {
    const auto& l = links[a];
    if (u < l.mu || a + 1 == links.size()) {
      if (plan.link_up(l, state)) {
        dest = l.to;
        return Outcome::Move;
      }
      return u_loss < l.f ? Outcome::Lost : Outcome::Retry;
    }
    u -= l.mu;
  }
  return Outcome::Exit;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn fn) {
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t a = 0; a < count; ++a) fn(a);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t a = next++; a < count && !failed; a = next++) fn(a);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

void check_config(const ValidatedNetwork& net, const SimConfig& c) {
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) throw std::invalid_argument("horizon must be positive");
  if (!(c.grid > 0.0) || !std::isfinite(c.grid)) throw std::invalid_argument("grid step must be positive");
  if (c.reps < 1) throw std::invalid_argument("reps must be at least 1");
  if (!(c.n_scale >= 1.0)) throw std::invalid_argument("scaling N must be at least 1");
  if (!(c.alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  if (c.init.counts.size() != net.node_count()) throw std::invalid_argument("initial counts must list one value per node");
  if (c.init.background && *c.init.background >= net.state_count()) {
    throw std::out_of_range("initial background state out of range");
  }
}

}  // namespace

std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32)};
  return std::mt19937_64(seq);
}

std::vector<double> sample_times(const SimConfig& config) {
  const auto count = static_cast<std::size_t>(std::floor(config.horizon / config.grid + 1e-9)) + 1;
  std::vector<double> t(count);
  for (std::size_t g = 0; g < count; ++g) t[g] = static_cast<double>(g) * config.grid;
  return t;
}

unsigned effective_threads(unsigned requested) {
  unsigned threads = requested == 0 ? std::max(1U, std::thread::hardware_concurrency()) : requested;
  if (const char* env = std::getenv("QNET_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) threads = std::min<unsigned>(threads, static_cast<unsigned>(cap));
  }
  return threads;
}

Trajectory run_one(const ValidatedNetwork& net, const SimConfig& config, std::size_t rep_index) {
  check_config(net, config);
  const Plan plan(net, config.n_scale, config.alpha);
  const std::vector<double> times = sample_times(config);
  auto eng = replication_engine(config.seed, rep_index);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Trajectory tr;
  tr.counts.resize(times.size() * plan.n);
  tr.loss.resize(times.size());
  tr.state.resize(times.size());
  tr.arrivals_by_state.assign(net.state_count(), 0);

  std::vector<long> m(config.init.counts.begin(), config.init.counts.end());
  long lost = 0;
  std::uint32_t x = config.init.background ? static_cast<std::uint32_t>(*config.init.background)
                                           : plan.draw_stationary(eng);
  double t = 0.0;
  std::size_t g = 0;
  auto record = [&](std::size_t at) {
    for (std::size_t i = 0; i < plan.n; ++i) tr.counts[at * plan.n + i] = m[i];
    tr.loss[at] = lost;
    tr.state[at] = x;
  };

  while (g < times.size()) {
    double service = 0.0;
    for (std::size_t i = 0; i < plan.n; ++i) service += static_cast<double>(m[i]) * plan.mu_total[i];
    const double flips = plan.flip_rate(x);
    const double total = plan.lambda_total + service + flips;
    const double t_next = total > 0.0 ? t - std::log1p(-unif(eng)) / total : INFINITY;
    while (g < times.size() && times[g] < t_next) record(g++);
    if (g == times.size()) break;
    t = t_next;
    ++tr.events;

    double u = unif(eng) * total;
    if (u < plan.lambda_total) {
      std::size_t i = 0;
      for (; i + 1 < plan.n && u >= plan.lambda[i]; ++i) u -= plan.lambda[i];
      ++m[i];
      ++tr.arrivals_by_state[x];
      continue;
    }
    u -= plan.lambda_total;
    if (u < service) {
      std::size_t i = 0;
      for (; i + 1 < plan.n; ++i) {
        const double r = static_cast<double>(m[i]) * plan.mu_total[i];
        if (u < r) break;
        u -= r;
      }
      while (m[i] == 0 || plan.mu_total[i] == 0.0) --i;  // rounding fall-through onto an idle tail node
      const double within = std::fmod(u, plan.mu_total[i]);
      std::size_t dest = 0;
      switch (resolve_service(plan, i, x, within, unif(eng), dest)) {
        case Outcome::Exit: --m[i]; break;
        case Outcome::Move: --m[i]; ++m[dest]; break;
        case Outcome::Lost: --m[i]; ++lost; break;
        case Outcome::Retry: break;
      }
      continue;
    }
    x = plan.flip(x, u - service);
  }
  return tr;
}

void sample_moments(const Matrix& x, Vector& mean, Vector& mean_se, Matrix& cov, Matrix& cov_se) {
  const Eigen::Index r = x.rows();
  const Eigen::Index d = x.cols();
  const double rd = static_cast<double>(r);
  mean = x.colwise().mean().transpose();
  const Matrix c = x.rowwise() - mean.transpose();
  cov = Matrix::Zero(d, d);
  cov_se = Matrix::Zero(d, d);
  mean_se = Vector::Zero(d);
  if (r < 2) return;
  for (Eigen::Index i = 0; i < d; ++i) {
    mean_se[i] = std::sqrt(c.col(i).squaredNorm() / (rd - 1.0) / rd);
    for (Eigen::Index j = i; j < d; ++j) {
      const Vector prod = c.col(i).cwiseProduct(c.col(j));
      const double m = prod.sum() / (rd - 1.0);
      const double var = (prod.array() - prod.mean()).square().sum() / (rd - 1.0);
      cov(i, j) = cov(j, i) = m;
      cov_se(i, j) = cov_se(j, i) = std::sqrt(var / rd);
    }
  }
}

SimEnsemble run_ensemble(const ValidatedNetwork& net, const SimConfig& config) {
  check_config(net, config);
  std::vector<Trajectory> runs(config.reps);
  parallel_for(config.reps, effective_threads(config.threads),
               [&](std::size_t rep) { runs[rep] = run_one(net, config, rep); });

  SimEnsemble e;
  e.times = sample_times(config);
  e.reps = config.reps;
  e.nodes = net.node_count();
  const auto grid = static_cast<Eigen::Index>(e.times.size());
  const auto n = static_cast<Eigen::Index>(e.nodes);
  const auto reps = static_cast<Eigen::Index>(config.reps);
  e.mean.resize(grid, n);
  e.mean_se.resize(grid, n);
  e.loss_mean.resize(grid);
  e.loss_se.resize(grid);
  Matrix sample(reps, n + 1);
  for (Eigen::Index g = 0; g < grid; ++g) {
    for (Eigen::Index r = 0; r < reps; ++r) {
      const Trajectory& tr = runs[static_cast<std::size_t>(r)];
      for (Eigen::Index i = 0; i < n; ++i) {
        sample(r, i) = static_cast<double>(tr.count(static_cast<std::size_t>(g), static_cast<std::size_t>(i), e.nodes));
      }
      sample(r, n) = static_cast<double>(tr.loss[static_cast<std::size_t>(g)]);
    }
    Vector mean, se;
    Matrix cov, cov_se;
    sample_moments(sample, mean, se, cov, cov_se);
    e.mean.row(g) = mean.head(n).transpose();
    e.mean_se.row(g) = se.head(n).transpose();
    e.cov.push_back(cov.topLeftCorner(n, n));
    e.cov_se.push_back(cov_se.topLeftCorner(n, n));
    e.loss_mean[g] = mean[n];
    e.loss_se[g] = se[n];
  }
  e.arrival_state_fraction = Vector::Zero(static_cast<Eigen::Index>(net.state_count()));
  for (const auto& tr : runs) {
    for (std::size_t k = 0; k < tr.arrivals_by_state.size(); ++k) {
      e.arrival_state_fraction[static_cast<Eigen::Index>(k)] += static_cast<double>(tr.arrivals_by_state[k]);
    }
  }
  const double arrivals = e.arrival_state_fraction.sum();
  if (arrivals > 0.0) e.arrival_state_fraction /= arrivals;
  if (config.keep_trajectories) e.trajectories = std::move(runs);
  return e;
}

FcltSample fclt_empirical(const ValidatedNetwork& net, SimConfig config, double t, const Vector& rho) {
  if (!(t > 0.0)) throw std::invalid_argument("fclt sample time must be positive");
  if (rho.size() != static_cast<Eigen::Index>(net.node_count())) throw std::invalid_argument("fluid vector has the wrong length");
  config.horizon = t;
  config.grid = t;
  config.init.counts.assign(net.node_count(), 0U);
  config.keep_trajectories = true;
  const SimEnsemble e = run_ensemble(net, config);
  const auto n = static_cast<Eigen::Index>(net.node_count());
  const double root = std::sqrt(config.n_scale);
  FcltSample s;
  s.samples.resize(static_cast<Eigen::Index>(config.reps), n);
  const std::size_t last = e.times.size() - 1;
  for (std::size_t r = 0; r < config.reps; ++r) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = static_cast<double>(e.trajectories[r].count(last, static_cast<std::size_t>(i), e.nodes));
      s.samples(static_cast<Eigen::Index>(r), i) = (m - config.n_scale * rho[i]) / root;
    }
  }
  sample_moments(s.samples, s.mean, s.mean_se, s.cov, s.cov_se);
  return s;
}

TaggedEstimate tagged_client_estimate(const ValidatedNetwork& net, std::size_t clients, std::uint64_t seed,
                                      unsigned threads) {
  if (clients < 2) throw std::invalid_argument("need at least two clients");
  const double lambda_total = net.total_arrival_rate();
  if (!(lambda_total > 0.0)) throw std::invalid_argument("network has no arrivals");
  const Plan plan(net, 1.0, 0.0);
  constexpr std::size_t kBatch = 1024;
  const std::size_t batches = (clients + kBatch - 1) / kBatch;
  std::vector<double> lost(clients), joint(clients);

  parallel_for(batches, effective_threads(threads), [&](std::size_t b) {
    auto eng = replication_engine(seed, b);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t end = std::min(clients, (b + 1) * kBatch);
    for (std::size_t c = b * kBatch; c < end; ++c) {
      double u = unif(eng) * lambda_total;
      std::size_t i = 0;
      for (; i + 1 < plan.n && u >= net.lambda(i); ++i) u -= net.lambda(i);
      std::uint32_t x = plan.draw_stationary(eng);
      double t = 0.0;
      bool is_lost = false;
      for (std::uint64_t step = 0;; ++step) {
        if (plan.mu_total[i] == 0.0) break;  // never served: never lost
        if (step > 100'000'000ULL) throw NumericalError("tagged client did not leave the network");
        const double flips = plan.flip_rate(x);
        const double total = plan.mu_total[i] + flips;
        t -= std::log1p(-unif(eng)) / total;
        double v = unif(eng) * total;
        if (v >= plan.mu_total[i]) {
          x = plan.flip(x, v - plan.mu_total[i]);
          continue;
        }
        std::size_t dest = 0;
        const Outcome o = resolve_service(plan, i, x, v, unif(eng), dest);
        if (o == Outcome::Exit) break;
        if (o == Outcome::Lost) {
          is_lost = true;
          break;
        }
        if (o == Outcome::Move) i = dest;
      }
      lost[c] = is_lost ? 1.0 : 0.0;
      joint[c] = is_lost ? t : 0.0;
    }
  });

  Matrix x(static_cast<Eigen::Index>(clients), 2);
  for (std::size_t c = 0; c < clients; ++c) {
    x(static_cast<Eigen::Index>(c), 0) = lost[c];
    x(static_cast<Eigen::Index>(c), 1) = joint[c];
  }
  Vector mean, se;
  Matrix cov, cov_se;
  sample_moments(x, mean, se, cov, cov_se);
  return TaggedEstimate{clients, mean[0], se[0], mean[1], se[1]};
}

}  // namespace qnet
