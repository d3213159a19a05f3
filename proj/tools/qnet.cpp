// qnet: moments, loss metrics, fluid/FCLT approximations, oracle and
// simulation for infinite-server networks with failing links.

#include "qnet/analytic.hpp"
#include "qnet/background.hpp"
#include "qnet/config.hpp"
#include "qnet/csv.hpp"
#include "qnet/errors.hpp"
#include "qnet/fclt.hpp"
#include "qnet/model.hpp"
#include "qnet/moments.hpp"
#include "qnet/oracle.hpp"
#include "qnet/perf.hpp"
#include "qnet/report.hpp"
#include "qnet/sim.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNumericalError = 2;
constexpr int kCompareFailed = 3;

struct Common {
  std::string config;
  std::string out;
};

struct Loaded {
  qnet::RunConfig run;
  qnet::ValidatedNetwork net;
  qnet::BackgroundChain chain;
};

Loaded load(const std::string& path) {
  qnet::RunConfig run = qnet::parse_config_file(path);
  qnet::ValidatedNetwork net = qnet::validate(run.spec);
  qnet::BackgroundChain chain = qnet::BackgroundChain::from_network(net);
  for (const auto& w : net.warnings()) std::cerr << "warning: " << w << "\n";
  return Loaded{std::move(run), std::move(net), std::move(chain)};
}

/// stdout unless --out names a file.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw qnet::ConfigError(path, "cannot open output file");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string node_label(const qnet::ValidatedNetwork& net, std::size_t i) {
  return net.nodes()[i].name.empty() ? std::to_string(i + 1) : net.nodes()[i].name;
}

std::vector<double> time_grid(double t, double step) {
  if (step <= 0.0) return {t};
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(t / step + 1e-9);
  for (std::size_t a = 0; a <= count; ++a) out.push_back(static_cast<double>(a) * step);
  return out;
}

int cmd_validate(const Common& c) {
  const Loaded l = load(c.config);
  Output out(c.out);
  qnet::CsvWriter csv(out.stream());
  csv.header({"section", "name", "field", "value"});
  const auto& net = l.net;
  csv.field("network").field("").field("nodes").field(static_cast<std::uint64_t>(net.node_count())).end_row();
  csv.field("network").field("").field("directed_links").field(static_cast<std::uint64_t>(net.links().size())).end_row();
  csv.field("network").field("").field("blocks").field(static_cast<std::uint64_t>(net.block_count())).end_row();
  csv.field("network").field("").field("background_states").field(static_cast<std::uint64_t>(net.state_count())).end_row();
  for (std::size_t i = 0; i < net.node_count(); ++i) {
    const std::string name = node_label(net, i);
    csv.field("node").field(name).field("lambda").field(net.lambda(i)).end_row();
    csv.field("node").field(name).field("mu_exit").field(net.mu_exit(i)).end_row();
    csv.field("node").field(name).field("nu").field(net.nu(i)).end_row();
    csv.field("node").field(name).field("mu_total").field(net.mu_total(i)).end_row();
  }
  for (const auto& link : net.links()) {
    const std::string name = node_label(net, link.from) + "->" + node_label(net, link.to);
    csv.field("link").field(name).field("mu").field(link.mu).end_row();
    csv.field("link").field(name).field("routing_probability").field(net.routing_probability(link.from, link.to)).end_row();
    csv.field("link").field(name).field("f").field(link.f).end_row();
    csv.field("link").field(name).field("block").field(link.block ? net.blocks()[*link.block].name : "ALWAYS_UP").end_row();
  }
  for (std::size_t b = 0; b < net.block_count(); ++b) {
    csv.field("block").field(net.blocks()[b].name).field("up_probability").field(l.chain.blocks()[b].up_probability()).end_row();
  }
  for (const auto& w : net.warnings()) csv.field("warning").field("").field("message").field(w).end_row();
  return kOk;
}

int cmd_moments(const Common& c, bool stationary, double t, unsigned order, bool include_loss, bool central,
                bool per_state) {
  const Loaded l = load(c.config);
  const std::size_t n = l.net.node_count();
  const qnet::MomentTable table =
      stationary ? qnet::stationary_factorial_moments(l.net, l.chain, order)
                 : qnet::transient_factorial_moments(l.net, l.chain, order, t, l.run.initial, include_loss);
  Output out(c.out);
  qnet::CsvWriter csv(out.stream());
  const std::string when = stationary ? "stationary" : qnet::format_double(t);
  if (central) {
    const qnet::CentralMoments cm = qnet::central_moments(table);
    csv.header({"time", "quantity", "node_i", "node_j", "value"});
    for (std::size_t i = 0; i < n; ++i) {
      csv.field(when).field("mean").field(node_label(l.net, i)).field("").field(cm.mean[static_cast<Eigen::Index>(i)]).end_row();
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        csv.field(when).field(i == j ? "variance" : "covariance").field(node_label(l.net, i)).field(node_label(l.net, j));
        csv.field(cm.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))).end_row();
      }
    }
    return kOk;
  }
  std::vector<std::string> head{"time", "r_loss"};
  for (std::size_t i = 0; i < n; ++i) head.push_back("r_" + node_label(l.net, i));
  head.push_back("state");
  head.push_back("value");
  csv.header(head);
  for (unsigned lvl = 0; lvl <= order; ++lvl) {
    const auto& idx = table.level(lvl);
    for (const auto& r : idx) {
      auto prefix = [&] {
        csv.field(when);
        for (unsigned v : r) csv.field(v);
      };
      prefix();
      csv.field("all").field(table.total(r)).end_row();
      if (per_state) {
        for (std::size_t k = 0; k < table.state_count(); ++k) {
          prefix();
          csv.field(static_cast<std::uint64_t>(k)).field(table.value(r, k)).end_row();
        }
      }
    }
  }
  return kOk;
}

int cmd_loss(const Common& c, std::optional<double> t, double step) {
  const Loaded l = load(c.config);
  Output out(c.out);
  qnet::CsvWriter csv(out.stream());
  if (t) {
    csv.header({"time", "expected_loss"});
    for (double s : time_grid(*t, step)) {
      csv.field(s).field(qnet::loss_mean(l.net, l.chain, s, l.run.initial)).end_row();
    }
    return kOk;
  }
  const qnet::LossMetrics m = qnet::loss_metrics(l.net, l.chain);
  csv.header({"node", "state", "omega", "tau", "sigma"});
  for (std::size_t i = 0; i < l.net.node_count(); ++i) {
    for (std::size_t k = 0; k < l.chain.state_count(); ++k) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto kk = static_cast<Eigen::Index>(k);
      csv.field(node_label(l.net, i)).field(static_cast<std::uint64_t>(k)).field(m.omega(ii, kk)).field(m.tau(ii, kk));
      csv.field(m.sigma(ii, kk)).end_row();
    }
  }
  csv.field("aggregate").field("all").field(m.omega_agg).field(m.tau_agg).field("").end_row();
  csv.field("conditional").field("all").field("").field(m.conditional_tau()).field("").end_row();
  return kOk;
}

int cmd_fluid(const Common& c, bool stationary, double t, double step) {
  const Loaded l = load(c.config);
  const qnet::FluidModel fm(l.net, l.chain);
  Output out(c.out);
  qnet::CsvWriter csv(out.stream());
  csv.header({"time", "node", "rho"});
  auto emit = [&](const std::string& when, const qnet::Vector& rho) {
    for (std::size_t i = 0; i < l.net.node_count(); ++i) {
      csv.field(when).field(node_label(l.net, i)).field(rho[static_cast<Eigen::Index>(i)]).end_row();
    }
  };
  if (stationary) {
    emit("stationary", fm.rho_stationary());
  } else {
    for (double s : time_grid(t, step)) emit(qnet::format_double(s), fm.rho(s));
  }
  return kOk;
}

int cmd_fclt(const Common& c, const std::string& alpha, bool stationary, double t, double n_scale) {
  const Loaded l = load(c.config);
  const qnet::Regime regime = qnet::parse_regime(alpha);
  const qnet::FluidModel fm(l.net, l.chain);
  qnet::Vector rho;
  qnet::Matrix cov;
  if (stationary) {
    rho = fm.rho_stationary();
    cov = qnet::fclt_covariance_stationary(l.net, l.chain, regime);
  } else {
    const qnet::FcltCovariance fc = qnet::fclt_covariance(l.net, l.chain, t, regime);
    rho = fc.rho;
    cov = fc.cov;
  }
  Output out(c.out);
  qnet::CsvWriter csv(out.stream());
  csv.header({"time", "regime", "kind", "node_i", "node_j", "value"});
  const std::string when = stationary ? "stationary" : qnet::format_double(t);
  const std::string reg(qnet::to_string(regime));
  for (std::size_t i = 0; i < l.net.node_count(); ++i) {
    csv.field(when).field(reg).field("mean").field(node_label(l.net, i)).field("");
    csv.field(n_scale * rho[static_cast<Eigen::Index>(i)]).end_row();
  }
  for (std::size_t i = 0; i < l.net.node_count(); ++i) {
    for (std::size_t j = 0; j < l.net.node_count(); ++j) {
      csv.field(when).field(reg).field("cov").field(node_label(l.net, i)).field(node_label(l.net, j));
      csv.field(n_scale * cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))).end_row();
    }
  }
  return kOk;
}

std::vector<unsigned> parse_caps(const std::string& text, std::size_t nodes) {
  std::vector<unsigned> caps;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      const long v = std::stol(part);
      if (v < 1) throw std::invalid_argument("cap");
      caps.push_back(static_cast<unsigned>(v));
    } catch (const std::exception&) {
      throw qnet::ConfigError("--caps", "expected positive integers separated by commas");
    }
  }
  if (caps.size() == 1 && nodes > 1) caps.assign(nodes, caps.front());
  if (caps.size() != nodes) throw qnet::ConfigError("--caps", "expected one cap per node");
  return caps;
}

int cmd_oracle(const Common& c, const std::string& caps_text, bool stationary, double t, bool lenient) {
  const Loaded l = load(c.config);
  const qnet::TruncatedChain tc(l.net, l.chain, parse_caps(caps_text, l.net.node_count()));
  qnet::OracleOptions opts;
  opts.strict = !lenient;
  const qnet::OracleDistribution dist =
      stationary ? qnet::oracle_stationary(tc, opts) : qnet::oracle_transient(tc, t, l.run.initial, opts);
  for (const auto& w : dist.warnings()) std::cerr << "warning: " << w << "\n";
  Output out(c.out);
  qnet::CsvWriter csv(out.stream());
  csv.header({"kind", "node", "index", "value"});
  csv.field("states").field("").field("").field(static_cast<std::uint64_t>(tc.size())).end_row();
  csv.field("boundary_mass").field("").field("").field(dist.boundary_mass()).end_row();
  if (stationary) {
    csv.field("loss_rate").field("").field("").field(dist.loss_rate()).end_row();
    // 6 points per axis keeps the grid small up to three nodes
    const std::size_t points = l.net.node_count() <= 3 ? 6 : 3;
    csv.field("pgf_residual").field("").field("").field(
        qnet::pgf_residual(dist, qnet::uniform_z_grid(l.net.node_count(), points))).end_row();
  }
  const qnet::Vector law = dist.background_law();
  for (Eigen::Index k = 0; k < law.size(); ++k) {
    csv.field("background").field("").field(static_cast<std::int64_t>(k)).field(law[k]).end_row();
  }
  for (std::size_t i = 0; i < l.net.node_count(); ++i) {
    csv.field("mean").field(node_label(l.net, i)).field("").field(dist.mean(i)).end_row();
  }
  for (std::size_t i = 0; i < l.net.node_count(); ++i) {
    const auto pmf = dist.marginal(i);
    for (std::size_t m = 0; m < pmf.size(); ++m) {
      csv.field("pmf").field(node_label(l.net, i)).field(static_cast<std::uint64_t>(m)).field(pmf[m]).end_row();
    }
  }
  return kOk;
}

int cmd_simulate(const Common& c, qnet::SimConfig sc, bool trajectories) {
  const Loaded l = load(c.config);
  sc.init = l.run.initial;
  sc.keep_trajectories = trajectories;
  const qnet::SimEnsemble e = qnet::run_ensemble(l.net, sc);
  Output out(c.out);
  qnet::CsvWriter csv(out.stream());
  const std::size_t n = l.net.node_count();
  if (trajectories) {
    std::vector<std::string> head{"rep", "time", "state", "loss"};
    for (std::size_t i = 0; i < n; ++i) head.push_back("m_" + node_label(l.net, i));
    csv.header(head);
    for (std::size_t r = 0; r < e.trajectories.size(); ++r) {
      const auto& tr = e.trajectories[r];
      for (std::size_t g = 0; g < e.times.size(); ++g) {
        csv.field(static_cast<std::uint64_t>(r)).field(e.times[g]).field(static_cast<std::uint64_t>(tr.state[g]));
        csv.field(static_cast<std::int64_t>(tr.loss[g]));
        for (std::size_t i = 0; i < n; ++i) csv.field(static_cast<std::int64_t>(tr.count(g, i, n)));
        csv.end_row();
      }
    }
    return kOk;
  }
  csv.header({"time", "quantity", "node_i", "node_j", "value", "se"});
  for (std::size_t g = 0; g < e.times.size(); ++g) {
    const auto gg = static_cast<Eigen::Index>(g);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      csv.field(e.times[g]).field("mean").field(node_label(l.net, i)).field("").field(e.mean(gg, ii)).field(e.mean_se(gg, ii)).end_row();
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto jj = static_cast<Eigen::Index>(j);
        csv.field(e.times[g]).field(i == j ? "variance" : "covariance").field(node_label(l.net, i)).field(node_label(l.net, j));
        csv.field(e.cov[g](ii, jj)).field(e.cov_se[g](ii, jj)).end_row();
      }
    }
    csv.field(e.times[g]).field("loss").field("").field("").field(e.loss_mean[gg]).field(e.loss_se[gg]).end_row();
  }
  return kOk;
}

/// Reads tandem parameters from a two-node config: arrivals at node 1 only,
/// one link 1->2 on a block, exits from node 2.
qnet::analytic::TandemParams tandem_from(const qnet::ValidatedNetwork& net) {
  if (net.node_count() != 2 || net.links().size() != 1 || net.block_count() != 1) {
    throw qnet::ConfigError("tandem-pmf", "needs a two-node tandem with one link on one block");
  }
  const auto& link = net.links().front();
  if (link.from != 0 || link.to != 1 || !link.block || net.lambda(1) != 0.0 || net.mu_exit(0) != 0.0) {
    throw qnet::ConfigError("tandem-pmf", "needs arrivals at node 1, link 1->2 on a block, and exits from node 2");
  }
  if (link.f != 0.0) throw qnet::ConfigError("tandem-pmf", "the closed-form law needs f = 0 on the link");
  const auto& b = net.blocks().front();
  return qnet::analytic::TandemParams{net.lambda(0), link.mu, net.mu_exit(1), b.q0, b.q1, 0.0};
}

int cmd_tandem_pmf(const Common& c, std::optional<std::size_t> max_m) {
  const Loaded l = load(c.config);
  const auto p = tandem_from(l.net);
  std::vector<double> pmf = qnet::analytic::tandem_node1_pmf_table(p);
  if (max_m) {
    pmf.resize(*max_m + 1, 0.0);
    for (std::size_t m = 0; m <= *max_m; ++m) pmf[m] = qnet::analytic::tandem_node1_pmf(p, m);
  }
  Output out(c.out);
  qnet::CsvWriter csv(out.stream());
  csv.header({"m", "pmf", "cdf"});
  double cdf = 0.0;
  for (std::size_t m = 0; m < pmf.size(); ++m) {
    cdf += pmf[m];
    csv.field(static_cast<std::uint64_t>(m)).field(pmf[m]).field(cdf).end_row();
  }
  return kOk;
}

int cmd_compare(const Common& c, const std::string& caps_text, qnet::CompareOptions opts) {
  const Loaded l = load(c.config);
  opts.caps = parse_caps(caps_text, l.net.node_count());
  opts.initial = l.run.initial;
  const qnet::RunReport report = qnet::compare(l.net, opts);
  Output out(c.out);
  report.write_csv(out.stream());
  if (!report.passed()) {
    std::cerr << "compare: at least one quantity is outside tolerance\n";
    return kCompareFailed;
  }
  return kOk;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("config", c.config, "network configuration (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "write CSV here instead of stdout");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infinite-server queueing networks with failing links"};
  app.require_subcommand(1);
  Common common;

  auto* validate = app.add_subcommand("validate", "check a configuration; CSV: section,name,field,value");
  add_common(validate, common);

  bool stationary = false;
  double t = 1.0;
  unsigned order = 2;
  bool include_loss = false, central = false, per_state = false;
  auto* moments = app.add_subcommand(
      "moments", "factorial moments; CSV: time,r_loss,r_<node>...,state,value (state 'all' sums over background)");
  add_common(moments, common);
  moments->add_flag("--stationary", stationary, "stationary moments");
  moments->add_option("--t", t, "evaluation time (transient)");
  moments->add_option("--order", order, "highest total order")->check(CLI::Range(0U, 12U));
  moments->add_flag("--include-loss", include_loss, "include the loss count (transient only)");
  moments->add_flag("--central", central, "emit mean/variance/covariance instead: time,quantity,node_i,node_j,value");
  moments->add_flag("--per-state", per_state, "also emit one row per background state");

  std::optional<double> loss_t;
  double step = 0.0;
  auto* loss = app.add_subcommand(
      "loss", "loss probability and time to loss; CSV: node,state,omega,tau,sigma. With --t: time,expected_loss");
  add_common(loss, common);
  loss->add_option("--t", loss_t, "emit expected losses up to this time");
  loss->add_option("--step", step, "time step for --t");

  auto* fluid = app.add_subcommand("fluid", "fluid limit; CSV: time,node,rho");
  add_common(fluid, common);
  fluid->add_flag("--stationary", stationary, "fixed point");
  fluid->add_option("--t", t, "final time");
  fluid->add_option("--step", step, "time step (0: final time only)");

  std::string alpha = "eq1";
  double n_scale = 1.0;
  auto* fclt = app.add_subcommand("fclt", "Gaussian approximation; CSV: time,regime,kind,node_i,node_j,value");
  add_common(fclt, common);
  fclt->add_option("--alpha", alpha, "regime: lt1, eq1 or gt1");
  fclt->add_option("--t", t, "time");
  fclt->add_flag("--stationary", stationary, "t -> infinity limit");
  fclt->add_option("--N", n_scale, "scale mean and covariance by N");

  std::string caps = "30";
  bool lenient = false;
  auto* oracle = app.add_subcommand("oracle", "truncated-CTMC ground truth; CSV: kind,node,index,value");
  add_common(oracle, common);
  oracle->add_option("--caps", caps, "per-node caps, comma separated (one value applies to all)");
  oracle->add_flag("--stationary", stationary, "stationary law (default: transient at --t)");
  oracle->add_option("--t", t, "time (transient)");
  oracle->add_flag("--lenient", lenient, "warn instead of failing when the boundary mass is large");

  qnet::SimConfig sc;
  sc.horizon = 10.0;
  sc.grid = 1.0;
  sc.reps = 1000;
  bool trajectories = false;
  auto* simulate = app.add_subcommand(
      "simulate", "Monte-Carlo ensemble; CSV: time,quantity,node_i,node_j,value,se (or per-rep trajectories)");
  add_common(simulate, common);
  simulate->add_option("--horizon", sc.horizon, "final time");
  simulate->add_option("--grid", sc.grid, "sampling step");
  simulate->add_option("--reps", sc.reps, "replications");
  simulate->add_option("--seed", sc.seed, "64-bit seed");
  simulate->add_option("--N", sc.n_scale, "scaling: lambda -> N lambda");
  simulate->add_option("--alpha-value", sc.alpha, "scaling: q -> N^alpha q");
  simulate->add_option("--threads", sc.threads, "worker threads (0: all, capped by QNET_THREADS)");
  simulate->add_flag("--trajectories", trajectories, "emit rep,time,state,loss,m_<node>... instead");

  std::optional<std::size_t> max_m;
  auto* tandem = app.add_subcommand("tandem-pmf", "closed-form node-1 law of a retry tandem; CSV: m,pmf,cdf");
  add_common(tandem, common);
  tandem->add_option("--max", max_m, "last m (default: until the tail is below 1e-12)");

  qnet::CompareOptions copts;
  std::vector<double> times;
  auto* compare = app.add_subcommand(
      "compare", "solver vs oracle vs simulation; CSV: quantity,analytic,oracle,sim,sim_se,tolerance,pass");
  add_common(compare, common);
  compare->add_option("--caps", caps, "oracle caps");
  compare->add_option("--reps", copts.reps, "simulation replications");
  compare->add_option("--seed", copts.seed, "64-bit seed");
  compare->add_option("--t", times, "comparison times (default 1 2)");
  compare->add_option("--tol", copts.tolerance, "solver/oracle tolerance");
  compare->add_option("--threads", copts.threads, "worker threads (0: all, capped by QNET_THREADS)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*validate) return cmd_validate(common);
    if (*moments) {
      if (stationary && include_loss) throw qnet::ConfigError("--include-loss", "loss moments have no stationary limit");
      return cmd_moments(common, stationary, t, order, include_loss, central, per_state);
    }
    if (*loss) return cmd_loss(common, loss_t, step);
    if (*fluid) return cmd_fluid(common, stationary, t, step);
    if (*fclt) return cmd_fclt(common, alpha, stationary, t, n_scale);
    if (*oracle) return cmd_oracle(common, caps, stationary, t, lenient);
    if (*simulate) return cmd_simulate(common, sc, trajectories);
    if (*tandem) return cmd_tandem_pmf(common, max_m);
    if (*compare) {
      if (!times.empty()) copts.times = times;
      return cmd_compare(common, caps, copts);
    }
  } catch (const qnet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const qnet::ValidationError& e) {
    std::cerr << "invalid network: " << e.what() << "\n";
    return kConfigError;
  } catch (const qnet::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const qnet::CapacityError& e) {
    std::cerr << "numerical failure (capacity): " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::out_of_range& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
