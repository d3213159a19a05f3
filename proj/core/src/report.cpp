#include "qnet/report.hpp"

#include "qnet/background.hpp"
#include "qnet/csv.hpp"
#include "qnet/oracle.hpp"
#include "qnet/perf.hpp"
#include "qnet/sim.hpp"

#include <cmath>
#include <stdexcept>

namespace qnet {

void RunReport::add(std::string name, double analytic, std::optional<double> oracle, std::optional<double> sim,
                    std::optional<double> sim_se, double tolerance) {
  ReportRow row{std::move(name), analytic, oracle, sim, sim_se, tolerance, true};
  if (oracle && !(std::abs(analytic - *oracle) <= tolerance)) row.pass = false;
  if (sim) {
    const double se = sim_se.value_or(0.0);
    if (!(std::abs(analytic - *sim) <= 3.0 * se + 1e-12)) row.pass = false;
  }
  rows_.push_back(std::move(row));
}

bool RunReport::passed() const {
  for (const auto& r : rows_) {
    if (!r.pass) return false;
  }
  return true;
}

void RunReport::write_csv(std::ostream& out) const {
  CsvWriter csv(out);
  csv.header({"quantity", "analytic", "oracle", "sim", "sim_se", "tolerance", "pass"});
  auto opt = [&](const std::optional<double>& v) {
    if (v) {
      csv.field(*v);
    } else {
      csv.field("");
    }
  };
  for (const auto& r : rows_) {
    csv.field(r.name).field(r.analytic);
    opt(r.oracle);
    opt(r.sim);
    opt(r.sim_se);
    csv.field(r.tolerance).field(r.pass ? "pass" : "fail");
    csv.end_row();
  }
}

RunReport compare(const ValidatedNetwork& net, const CompareOptions& opts) {
  const std::size_t n = net.node_count();
  if (opts.caps.size() != n) throw std::invalid_argument("compare needs one oracle cap per node");
  InitialCondition init = opts.initial;
  if (init.counts.empty()) init.counts.assign(n, 0U);
  const BackgroundChain chain = BackgroundChain::from_network(net);
  RunReport report;
  auto label = [&](std::size_t i) { return net.nodes()[i].name.empty() ? std::to_string(i + 1) : net.nodes()[i].name; };

  const TruncatedChain tc(net, chain, opts.caps);
  const OracleDistribution stat = oracle_stationary(tc);
  const MomentTable table = stationary_factorial_moments(net, chain, 2);
  MultiIndex r(n + 1, 0U);
  for (std::size_t i = 0; i < n; ++i) {
    r[1 + i] = 1;
    report.add("stationary_mean[" + label(i) + "]", table.total(r), stat.factorial_moment(r), std::nullopt,
               std::nullopt, opts.tolerance);
    r[1 + i] = 0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      r[1 + i] += 1;
      r[1 + j] += 1;
      report.add("stationary_factorial[" + label(i) + "," + label(j) + "]", table.total(r), stat.factorial_moment(r),
                 std::nullopt, std::nullopt, opts.tolerance);
      r[1 + i] -= 1;
      r[1 + j] -= 1;
    }
  }
  const double lambda_bar = net.total_arrival_rate();
  if (lambda_bar > 0.0) {
    report.add("omega", loss_metrics(net, chain).omega_agg, stat.loss_rate() / lambda_bar, std::nullopt, std::nullopt,
               opts.tolerance);
  }

  for (double t : opts.times) {
    const FirstMoments fm = transient_first_moments(net, chain, init, t);
    const OracleDistribution tr = oracle_transient(tc, t, init);
    SimConfig sc;
    sc.horizon = t;
    sc.grid = t;
    sc.reps = opts.reps;
    sc.seed = opts.seed;
    sc.init = init;
    sc.threads = opts.threads;
    const SimEnsemble e = run_ensemble(net, sc);
    const auto last = static_cast<Eigen::Index>(e.times.size() - 1);
    const std::string at = "@t=" + format_double(t);
    const Vector means = fm.means();
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      report.add("mean[" + label(i) + "]" + at, means[ii], tr.mean(i), e.mean(last, ii), e.mean_se(last, ii),
                 opts.tolerance);
    }
    report.add("expected_loss" + at, loss_mean(net, chain, t, init), std::nullopt, e.loss_mean[last], e.loss_se[last],
               opts.tolerance);
  }
  return report;
}

}  // namespace qnet
