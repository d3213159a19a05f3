// Acceptance runner: one pass/fail line per criterion.
//   qnet_acceptance                 run everything
//   qnet_acceptance --criterion 4   run one
// Exit status is 0 only when every selected criterion passes, including its
// runtime budget.

#include "test_support.hpp"

#include "qnet/analytic.hpp"
#include "qnet/background.hpp"
#include "qnet/fclt.hpp"
#include "qnet/moments.hpp"
#include "qnet/networks.hpp"
#include "qnet/oracle.hpp"
#include "qnet/perf.hpp"
#include "qnet/sim.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace qnet;
using qnet::testing::load;
using qnet::testing::scaled_error;

/// Collects comparisons; keeps the worst error and the first few failures.
class Tally {
 public:
  void check(const std::string& what, double err, double tol) {
    ++checks_;
    worst_ = std::max(worst_, err / tol);
    if (!(err <= tol)) {
      ++failures_;
      if (failures_ <= 4) {
        std::ostringstream s;
        s << what << " err=" << err << " tol=" << tol;
        first_.push_back(s.str());
      }
    }
  }
  void require(const std::string& what, bool cond) { check(what, cond ? 0.0 : 1.0, 0.5); }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failures_ == 0 && checks_ > 0; }
  std::string detail() const {
    std::ostringstream s;
    s << checks_ << " checks, " << failures_ << " failed, worst err/tol " << worst_;
    for (const auto& n : notes_) s << "; " << n;
    for (const auto& f : first_) s << "; FAIL " << f;
    return s.str();
  }

 private:
  std::size_t checks_ = 0;
  std::size_t failures_ = 0;
  double worst_ = 0.0;
  std::vector<std::string> first_;
  std::vector<std::string> notes_;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

MultiIndex unit(std::size_t n, std::size_t i, unsigned order = 1) {
  MultiIndex r(n + 1, 0U);
  r[1 + i] = order;
  return r;
}

// 1. Single M/M/inf node.
Tally criterion_1() {
  Tally t;
  const auto [net, chain] = load("fix_a.json");
  const MomentTable st = stationary_factorial_moments(net, chain, 2);
  t.check("stationary mean", std::abs(st.total(unit(1, 0)) - 3.0), 1e-12);
  t.check("stationary (M)_2", std::abs(st.total(unit(1, 0, 2)) - 9.0), 1e-12);
  const auto init = InitialCondition::empty(1);
  for (double s : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    const double exact = 3.0 * (1.0 - std::exp(-s));
    t.check("mean t=" + num(s), std::abs(transient_first_moments(net, chain, init, s).means()[0] - exact), 1e-10);
    const MomentTable tr = transient_factorial_moments(net, chain, 2, s, init, false);
    t.check("table mean t=" + num(s), std::abs(tr.total(unit(1, 0)) - exact), 1e-10);
  }
  return t;
}

// 2. Symmetric complete network against its closed form.
Tally criterion_2() {
  Tally t;
  const auto [net, chain] = load("fix_c.json");
  const analytic::SymmetricSpec spec{3, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  const double closed = analytic::symmetric_mean(spec);
  const Vector m = stationary_first_moments(net, chain).means();
  t.note("solver " + num(m[0]) + " closed form " + num(closed));
  for (Eigen::Index i = 0; i < 3; ++i) t.check("f=1 node " + std::to_string(i + 1), std::abs(m[i] - closed), 1e-10);
  for (auto [q0, q1] : {std::pair{1.0, 1.0}, {1.0, 3.0}, {5.0, 0.2}}) {
    const auto n0 = validate(networks::symmetric_complete(3, 2.0, 1.0, 1.0, q0, q1, 0.0));
    const Vector m0 = stationary_first_moments(n0, BackgroundChain::from_network(n0)).means();
    analytic::SymmetricSpec s0 = spec;
    s0.q0 = q0;
    s0.q1 = q1;
    s0.f = 0.0;
    for (Eigen::Index i = 0; i < 3; ++i) {
      t.check("f=0 q=(" + num(q0) + "," + num(q1) + ") vs lambda/mu0", std::abs(m0[i] - 2.0), 1e-10);
      t.check("f=0 closed form", std::abs(m0[i] - analytic::symmetric_mean(s0)), 1e-10);
    }
  }
  return t;
}

// 3. Tandem means and loss rate: solver, closed form, oracle.
Tally criterion_3() {
  Tally t;
  const auto [net, chain] = load("fix_b.json");
  const FirstMoments fm = stationary_first_moments(net, chain);
  const analytic::TandemMeans cf = analytic::tandem_stationary_means({1, 1, 1, 1, 1, 1});
  const TruncatedChain tc(net, chain, {30, 30});
  const OracleDistribution od = oracle_stationary(tc);
  const double expected[2][2] = {{0.5, 0.5}, {1.0 / 6.0, 1.0 / 3.0}};
  const double closed[2][2] = {{cf.v10, cf.v11}, {cf.v20, cf.v21}};
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      const std::string name = "v" + std::to_string(i + 1) + std::to_string(k);
      const double v = fm.v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      t.check(name + " solver", std::abs(v - expected[i][k]), 1e-8);
      t.check(name + " closed form", std::abs(closed[i][k] - expected[i][k]), 1e-8);
      t.check(name + " oracle", std::abs(od.factorial_moment(unit(2, i), k) - expected[i][k]), 1e-8);
    }
  }
  double solver_loss = 0.0;
  for (std::size_t k = 0; k < 2; ++k) solver_loss += net.loss_rate(0, k) * fm.v(0, static_cast<Eigen::Index>(k));
  t.check("loss solver", std::abs(solver_loss - 0.5), 1e-8);
  t.check("loss closed form", std::abs(cf.loss_rate - 0.5), 1e-8);
  t.check("loss oracle", std::abs(od.loss_rate() - 0.5), 1e-8);
  return t;
}

// 4. Retry tandem node-1 law against oracle and simulation.
Tally criterion_4() {
  Tally t;
  for (const char* q1s : {"0.01", "0.5", "1", "3"}) {
    const auto [net, chain] = load(std::string("fix_d_q1_") + q1s + ".json");
    const analytic::TandemParams p{20.0, 3.0, 2.0, 1.0, std::stod(q1s), 0.0};
    std::vector<double> pmf = analytic::tandem_node1_pmf_table(p);

    // Oracle: node-1 cap past the 1e-12 tail, node-2 cap from its moments.
    const std::vector<unsigned> moment_caps = testing::caps_for(net, chain);
    const auto cap1 = static_cast<unsigned>(pmf.size() + 20);
    const TruncatedChain tc(net, chain, {cap1, moment_caps[1]});
    const OracleDistribution od = oracle_stationary(tc);
    const std::vector<double> marg = od.marginal(0);
    while (pmf.size() < marg.size()) pmf.push_back(analytic::tandem_node1_pmf(p, pmf.size()));
    double tv = 0.0;
    for (std::size_t m = 0; m < pmf.size(); ++m) tv += std::abs(pmf[m] - (m < marg.size() ? marg[m] : 0.0));
    tv *= 0.5;
    t.check("q1=" + std::string(q1s) + " TV(closed form, oracle) caps (" + std::to_string(cap1) + "," +
                std::to_string(moment_caps[1]) + ")",
            tv, 1e-6);

    // Simulation: independent replications sampled once after a burn-in.
    SimConfig sc;
    sc.horizon = 30.0;
    sc.grid = 30.0;
    sc.reps = 10000;
    sc.seed = 4001;
    sc.init = InitialCondition::empty(2);
    sc.keep_trajectories = true;
    const SimEnsemble e = run_ensemble(net, sc);
    const double sd = std::sqrt(analytic::TandemNode1Law::from(p).variance());
    const std::size_t width = std::max<std::size_t>(1, static_cast<std::size_t>(sd / 4.0));
    std::vector<double> observed;
    for (const auto& tr : e.trajectories) {
      const auto bin = static_cast<std::size_t>(tr.count(1, 0, 2)) / width;
      if (bin >= observed.size()) observed.resize(bin + 1, 0.0);
      observed[bin] += 1.0;
    }
    std::vector<double> expected((pmf.size() + width - 1) / width, 0.0);
    for (std::size_t m = 0; m < pmf.size(); ++m) expected[m / width] += pmf[m];
    const double reps = static_cast<double>(sc.reps);
    std::size_t bins = 0;
    double chi2 = 0.0;
    for (std::size_t b = 0; b < expected.size(); ++b) {
      const double mean = reps * expected[b];
      if (mean < 25.0) continue;
      ++bins;
      const double obs = b < observed.size() ? observed[b] : 0.0;
      const double se = std::sqrt(reps * expected[b] * (1.0 - expected[b]));
      chi2 += (obs - mean) * (obs - mean) / (se * se);
      t.check("q1=" + std::string(q1s) + " bin " + std::to_string(b * width) + "..", std::abs(obs - mean), 3.0 * se);
    }
    t.note("q1=" + std::string(q1s) + " TV " + num(tv) + ", " + std::to_string(bins) + " bins of width " +
           std::to_string(width) + ", chi2 " + num(chi2));
  }
  return t;
}

OracleDistribution stationary_oracle(const ValidatedNetwork& net, const BackgroundChain& chain,
                                     std::unique_ptr<TruncatedChain>& tc) {
  double spread = 9.0;
  for (int attempt = 0;; ++attempt) {
    tc = std::make_unique<TruncatedChain>(net, chain, testing::caps_for(net, chain, spread));
    OracleDistribution od = oracle_stationary(*tc);
    if (od.boundary_mass() < 1e-11 || attempt == 3) return od;
    spread *= 1.5;
  }
}

// 5. Factorial moments up to order 2 against the oracle on random networks.
Tally criterion_5() {
  Tally t;
  const auto nets = testing::random_networks(5);
  std::size_t idx = 0;
  for (const auto& net : nets) {
    ++idx;
    const BackgroundChain chain = BackgroundChain::from_network(net);
    const std::size_t n = net.node_count();
    const std::string tag = "net" + std::to_string(idx) + " (n=" + std::to_string(n) +
                            ",K=" + std::to_string(net.block_count()) + ")";
    std::unique_ptr<TruncatedChain> tc;
    const OracleDistribution od = stationary_oracle(net, chain, tc);
    const MomentTable st = stationary_factorial_moments(net, chain, 2);
    for (unsigned l = 1; l <= 2; ++l) {
      for (const auto& r : st.level(l)) {
        for (std::size_t k = 0; k < chain.state_count(); ++k) {
          t.check(tag + " stationary", scaled_error(st.value(r, k), od.factorial_moment(r, k)), 1e-8);
        }
      }
    }
    const auto init = InitialCondition::empty(n);
    for (double s : {0.5, 2.0}) {
      const OracleDistribution ot = oracle_transient(*tc, s, init);
      const MomentTable tr = transient_factorial_moments(net, chain, 2, s, init, false);
      for (unsigned l = 1; l <= 2; ++l) {
        for (const auto& r : tr.level(l)) {
          for (std::size_t k = 0; k < chain.state_count(); ++k) {
            t.check(tag + " t=" + num(s), scaled_error(tr.value(r, k), ot.factorial_moment(r, k)), 1e-6);
          }
        }
      }
    }
    t.note(tag + " oracle states " + std::to_string(tc->size()));
  }
  return t;
}

// 6. Loss probability: linear system vs oracle flow and long-run loss slope;
// time to loss vs tagged-client simulation.
Tally criterion_6() {
  Tally t;
  const auto nets = testing::random_networks(5);
  std::size_t idx = 0;
  for (const auto& net : nets) {
    ++idx;
    const BackgroundChain chain = BackgroundChain::from_network(net);
    const std::string tag = "net" + std::to_string(idx);
    const LossMetrics lm = loss_metrics(net, chain);
    const double lambda_bar = net.total_arrival_rate();
    std::unique_ptr<TruncatedChain> tc;
    const OracleDistribution od = stationary_oracle(net, chain, tc);
    t.check(tag + " omega vs oracle", std::abs(lm.omega_agg - od.loss_rate() / lambda_bar), 1e-8);

    // Transients decay at least as fast as the slowest exit or block rate.
    double gamma = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < net.node_count(); ++i) gamma = std::min(gamma, net.mu_exit(i));
    gamma = std::min(gamma, chain.spectral_gap());
    const double t1 = 40.0 / gamma;
    const double t2 = 2.0 * t1;
    const auto init = InitialCondition::empty(net.node_count());
    const double slope = (loss_mean(net, chain, t2, init) - loss_mean(net, chain, t1, init)) / (t2 - t1);
    t.check(tag + " omega vs loss slope", std::abs(lm.omega_agg - slope / lambda_bar), 1e-6);
  }

  const auto [net, chain] = load("fix_b.json");
  const LossMetrics lm = loss_metrics(net, chain);
  const TaggedEstimate est = tagged_client_estimate(net, 100000, 6001);
  t.check("FIX-B tau vs tagged simulation", std::abs(lm.tau_agg - est.tau), 3.0 * est.tau_se);
  t.note("tau " + num(lm.tau_agg) + " sim " + num(est.tau) + " +- " + num(est.tau_se));
  return t;
}

// 7. Background chain algebra.
Tally criterion_7() {
  Tally t;
  std::mt19937_64 eng(7007);
  std::uniform_real_distribution<double> rate(0.1, 5.0);
  for (std::size_t k = 1; k <= 4; ++k) {
    for (int trial = 0; trial < 3; ++trial) {
      std::vector<BlockRates> blocks;
      for (std::size_t b = 0; b < k; ++b) blocks.push_back({rate(eng), rate(eng)});
      const BackgroundChain chain(blocks);
      const std::string tag = "K=" + std::to_string(k);
      for (double s : {0.0, 0.05, 0.3, 1.0, 2.5, 7.0}) {
        const Matrix diff = chain.transition_matrix(s) - chain.transition_matrix_expm(s);
        t.check(tag + " P(t) t=" + num(s), diff.cwiseAbs().maxCoeff(), 1e-12);
      }
      const Matrix q = chain.generator_dense();
      const Matrix d = chain.deviation_matrix();
      const auto dim = q.rows();
      const Matrix target = Vector::Ones(dim) * chain.stationary().transpose() - Matrix::Identity(dim, dim);
      t.check(tag + " QD", (q * d - target).cwiseAbs().maxCoeff(), 1e-10);
      t.check(tag + " DQ", (d * q - target).cwiseAbs().maxCoeff(), 1e-10);
      if (k == 1) {
        const double q0 = blocks[0].q0, q1 = blocks[0].q1, qs = q0 + q1;
        Matrix closed(2, 2);
        closed << q0, -q0, -q1, q1;
        closed /= qs * qs;
        t.check("K=1 deviation closed form", (d - closed).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
  }
  return t;
}

// 8. Symmetric FCLT closed form.
Tally criterion_8() {
  Tally t;
  const auto [net, chain] = load("fix_c.json");
  const analytic::SymmetricSpec spec{3, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  const Matrix ones = Matrix::Ones(3, 3);
  for (int a = 0; a <= 20; ++a) {
    const double s = 0.25 * a;
    const FcltCovariance fc = fclt_covariance(net, chain, s, Regime::LT1);
    t.check("xi t=" + num(s), (fc.cov - analytic::symmetric_fclt_xi(spec, s) * ones).cwiseAbs().maxCoeff(), 1e-8);
  }
  const Matrix limit = fclt_covariance_stationary(net, chain, Regime::EQ1);
  const Matrix closed = (4.0 / 27.0) * ones + (4.0 / 3.0) * Matrix::Identity(3, 3);
  t.check("stationary covariance", (limit - closed).cwiseAbs().maxCoeff(), 1e-8);
  return t;
}

// 9. Empirical FCLT on the scaled tandem.
Tally criterion_9() {
  Tally t;
  const auto [net, chain] = load("fix_tandem_paper.json");
  SimConfig sc;
  sc.n_scale = 100.0;
  sc.alpha = 1.0;
  sc.reps = 5000;
  sc.seed = 9009;
  for (double s : {0.5, 1.0}) {
    const FcltCovariance fc = fclt_covariance(net, chain, s, Regime::EQ1);
    const FcltSample e = fclt_empirical(net, sc, s, fc.rho);
    for (Eigen::Index i = 0; i < 2; ++i) {
      t.check("t=" + num(s) + " mean node " + std::to_string(i + 1), std::abs(e.mean[i]), 3.0 * e.mean_se[i]);
      t.note("t=" + num(s) + " mean node " + std::to_string(i + 1) + " " + num(e.mean[i]) + " se " + num(e.mean_se[i]));
      for (Eigen::Index j = i; j < 2; ++j) {
        t.check("t=" + num(s) + " cov(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")",
                std::abs(e.cov(i, j) - fc.cov(i, j)), 3.0 * e.cov_se(i, j));
      }
    }
  }
  return t;
}

// 10. Generating-function residual of the oracle.
Tally criterion_10() {
  Tally t;
  OracleOptions lenient;
  lenient.strict = false;
  const auto grid = uniform_z_grid(2, 11);
  auto residual = [&](const char* fixture, std::vector<unsigned> caps) {
    const auto [net, chain] = load(fixture);
    const TruncatedChain tc(net, chain, std::move(caps));
    return pgf_residual(oracle_stationary(tc, lenient), grid);
  };
  t.check("FIX-B caps (20,20)", residual("fix_b.json", {20, 20}), 1e-6);
  t.check("FIX-B0 caps (60,40)", residual("fix_b0.json", {60, 40}), 1e-6);
  for (const char* fixture : {"fix_b.json", "fix_b0.json"}) {
    double prev = std::numeric_limits<double>::infinity();
    std::string seq;
    for (unsigned cap : {10U, 20U, 40U}) {
      const double r = residual(fixture, {cap, cap});
      seq += " " + num(r);
      // Strictly smaller unless both are already at rounding level.
      t.require(std::string(fixture) + " decrease at cap " + std::to_string(cap),
                r < prev || std::max(r, prev) <= 1e-12);
      prev = r;
    }
    t.note(std::string(fixture) + " residuals" + seq);
  }
  return t;
}

// 11. Compact covariance formula vs the full diffusion ODE.
Tally criterion_11() {
  Tally t;
  for (const char* fixture : {"fix_b.json", "fix_c.json"}) {
    const auto [net, chain] = load(fixture);
    for (double s : {0.25, 1.0, 2.0, 5.0}) {
      const Matrix compact = fclt_covariance(net, chain, s, Regime::EQ1).cov;
      const Matrix full = fclt_covariance_full(net, chain, s);
      t.check(std::string(fixture) + " t=" + num(s), (compact - full).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
  return t;
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  std::function<Tally()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "M/M/inf baseline", 1.0, criterion_1},
      {2, "symmetric network means", 1.0, criterion_2},
      {3, "tandem means and loss rate", 5.0, criterion_3},
      {4, "retry tandem node-1 law", 120.0, criterion_4},
      {5, "factorial moments vs oracle", 120.0, criterion_5},
      {6, "loss probability and time to loss", 180.0, criterion_6},
      {7, "background algebra", 5.0, criterion_7},
      {8, "symmetric FCLT closed form", 10.0, criterion_8},
      {9, "empirical FCLT", 300.0, criterion_9},
      {10, "generating-function residual", 60.0, criterion_10},
      {11, "compact vs full covariance", 30.0, criterion_11},
  };
  return all;
}

bool run(const Criterion& c) {
  const auto start = std::chrono::steady_clock::now();
  Tally tally;
  std::string error;
  try {
    tally = c.run();
  } catch (const std::exception& e) {
    error = e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < c.budget_s;
  const bool pass = error.empty() && tally.ok() && in_time;
  std::printf("criterion %2d %s  %s  [%.2f s, budget %.0f s%s]  %s\n", c.id, pass ? "PASS" : "FAIL", c.title, secs,
              c.budget_s, in_time ? "" : ", OVER BUDGET",
              error.empty() ? tally.detail().c_str() : ("exception: " + error).c_str());
  std::fflush(stdout);
  return pass;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--criterion") == 0 && a + 1 < argc) {
      only = std::atoi(argv[++a]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  bool all_pass = true;
  bool found = false;
  for (const auto& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    found = true;
    all_pass = run(c) && all_pass;
  }
  if (!found) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return all_pass ? 0 : 1;
}
