#include "qnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>

namespace qnet {

std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::EmptyNetwork: return "empty-network";
    case Violation::InvalidNode: return "invalid-node";
    case Violation::SelfLoop: return "self-loop";
    case Violation::NegativeRate: return "negative-rate";
    case Violation::NonFiniteValue: return "non-finite-value";
    case Violation::LossProbabilityOutOfRange: return "loss-probability-out-of-range";
    case Violation::NonPositiveBlockRate: return "non-positive-block-rate";
    case Violation::MissingBlock: return "missing-block";
    case Violation::DuplicateLink: return "duplicate-link";
    case Violation::TooManyBlocks: return "too-many-blocks";
    case Violation::NoExitNode: return "no-exit";
    case Violation::UnreachableExit: return "unreachable-exit";
  }
  return "unknown";
}

ValidationError::ValidationError(Violation v, const std::string& detail)
    : std::runtime_error(std::string(to_string(v)) + ": " + detail), violation_(v) {}

double RateBundle::jump_total() const { return std::accumulate(jump.begin(), jump.end(), 0.0); }

namespace {

void require(bool ok, Violation v, const std::string& detail) {
  if (!ok) throw ValidationError(v, detail);
}

std::string link_name(const std::vector<NodeSpec>& nodes, std::size_t i, std::size_t j) {
  auto label = [&](std::size_t k) {
    return k < nodes.size() && !nodes[k].name.empty() ? nodes[k].name : std::to_string(k + 1);
  };
  return "link " + label(i) + "->" + label(j);
}

}  // namespace

ValidatedNetwork validate(const NetworkSpec& spec) {
  require(!spec.nodes.empty(), Violation::EmptyNetwork, "network has no nodes");
  require(spec.blocks.size() <= kMaxBlocks, Violation::TooManyBlocks,
          std::to_string(spec.blocks.size()) + " blocks exceed the cap of " +
              std::to_string(kMaxBlocks));

  const std::size_t n = spec.nodes.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = spec.nodes[i];
    const std::string who = "node " + (node.name.empty() ? std::to_string(i + 1) : node.name);
    require(std::isfinite(node.lambda) && std::isfinite(node.mu_exit), Violation::NonFiniteValue, who);
    require(node.lambda >= 0.0, Violation::NegativeRate, who + " has negative lambda");
    require(node.mu_exit >= 0.0, Violation::NegativeRate, who + " has negative mu_exit");
  }
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& block = spec.blocks[b];
    const std::string who = "block " + (block.name.empty() ? std::to_string(b + 1) : block.name);
    require(std::isfinite(block.q0) && std::isfinite(block.q1), Violation::NonFiniteValue, who);
    require(block.q0 > 0.0 && block.q1 > 0.0, Violation::NonPositiveBlockRate,
            who + " needs strictly positive q0 and q1");
  }

  ValidatedNetwork net;
  net.nodes_ = spec.nodes;
  net.blocks_ = spec.blocks;

  std::set<std::pair<std::size_t, std::size_t>> seen;
  auto add_directed = [&](std::size_t i, std::size_t j, const LinkSpec& l) {
    const std::string who = link_name(spec.nodes, i, j);
    require(seen.emplace(i, j).second, Violation::DuplicateLink, who + " declared twice");
    net.links_.push_back(DirectedLink{i, j, l.mu, l.f, l.block});
  };
  for (const auto& l : spec.links) {
    require(l.from < n && l.to < n, Violation::InvalidNode,
            "link references node index outside 1.." + std::to_string(n));
    const std::string who = link_name(spec.nodes, l.from, l.to);
    require(l.from != l.to, Violation::SelfLoop, who);
    require(std::isfinite(l.mu) && std::isfinite(l.f), Violation::NonFiniteValue, who);
    require(l.mu >= 0.0, Violation::NegativeRate, who + " has negative mu");
    require(l.f >= 0.0 && l.f <= 1.0, Violation::LossProbabilityOutOfRange,
            who + " has f=" + std::to_string(l.f) + " outside [0,1]");
    require(!l.block || *l.block < spec.blocks.size(), Violation::MissingBlock,
            who + " references a block that does not exist");
    add_directed(l.from, l.to, l);
    if (l.bidirectional) add_directed(l.to, l.from, l);
  }

  net.out_links_.assign(n, {});
  net.nu_.assign(n, 0.0);
  for (std::size_t li = 0; li < net.links_.size(); ++li) {
    const auto& l = net.links_[li];
    net.out_links_[l.from].push_back(li);
    net.nu_[l.from] += l.mu;
  }

  const bool any_exit =
      std::any_of(spec.nodes.begin(), spec.nodes.end(), [](const NodeSpec& s) { return s.mu_exit > 0.0; });
  require(any_exit, Violation::NoExitNode, "no node has mu_exit > 0, the network cannot be stable");

  // Backward reachability from exit nodes along positive-rate links.
  std::vector<bool> reaches_exit(n, false);
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (spec.nodes[i].mu_exit > 0.0) {
      reaches_exit[i] = true;
      frontier.push_back(i);
    }
  }
  while (!frontier.empty()) {
    const std::size_t j = frontier.back();
    frontier.pop_back();
    for (const auto& l : net.links_) {
      if (l.to == j && l.mu > 0.0 && !reaches_exit[l.from]) {
        reaches_exit[l.from] = true;
        frontier.push_back(l.from);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (net.mu_total(i) > 0.0) {
      require(reaches_exit[i], Violation::UnreachableExit,
              "node " + (spec.nodes[i].name.empty() ? std::to_string(i + 1) : spec.nodes[i].name) +
                  " cannot route customers to any exit");
    } else {
      net.warnings_.push_back("node " +
                              (spec.nodes[i].name.empty() ? std::to_string(i + 1) : spec.nodes[i].name) +
                              " has no service (mu_i = 0); customers accumulate there");
    }
  }

  const double size = static_cast<double>(n) * static_cast<double>(net.state_count());
  if (size > kStateSpaceWarning) {
    net.warnings_.push_back("n * 2^K = " + std::to_string(static_cast<long long>(size)) +
                            " exceeds 1e5; dense background algebra will be slow");
  }
  return net;
}

double ValidatedNetwork::total_arrival_rate() const {
  double s = 0.0;
  for (const auto& node : nodes_) s += node.lambda;
  return s;
}

std::optional<std::size_t> ValidatedNetwork::link_index(std::size_t i, std::size_t j) const {
  if (i >= nodes_.size()) return std::nullopt;
  for (std::size_t li : out_links_[i]) {
    if (links_[li].to == j) return li;
  }
  return std::nullopt;
}

double ValidatedNetwork::mu(std::size_t i, std::size_t j) const {
  const auto li = link_index(i, j);
  return li ? links_[*li].mu : 0.0;
}

double ValidatedNetwork::routing_probability(std::size_t i, std::size_t j) const {
  const double total = mu_total(i);
  return total > 0.0 ? mu(i, j) / total : 0.0;
}

bool ValidatedNetwork::link_indicator(std::size_t i, std::size_t j, std::size_t state) const {
  const auto li = link_index(i, j);
  if (!li) throw std::out_of_range(link_name(nodes_, i, j) + " is not declared");
  if (state >= state_count()) throw std::out_of_range("background state out of range");
  return link_up(links_[*li], state);
}

RateBundle ValidatedNetwork::effective_rates(std::size_t i, std::size_t state) const {
  if (i >= nodes_.size()) throw std::out_of_range("node index out of range");
  if (state >= state_count()) throw std::out_of_range("background state out of range");
  RateBundle r;
  r.jump.assign(nodes_.size(), 0.0);
  r.exit = nodes_[i].mu_exit;
  for (std::size_t li : out_links_[i]) {
    const auto& l = links_[li];
    if (link_up(l, state)) {
      r.jump[l.to] += l.mu;
    } else {
      r.loss += l.f * l.mu;
      r.retry += (1.0 - l.f) * l.mu;
    }
  }
  return r;
}

double ValidatedNetwork::loss_rate(std::size_t i, std::size_t state) const {
  double s = 0.0;
  for (std::size_t li : out_links_[i]) {
    const auto& l = links_[li];
    if (!link_up(l, state)) s += l.f * l.mu;
  }
  return s;
}

double ValidatedNetwork::retry_rate(std::size_t i, std::size_t state) const {
  double s = 0.0;
  for (std::size_t li : out_links_[i]) {
    const auto& l = links_[li];
    if (!link_up(l, state)) s += (1.0 - l.f) * l.mu;
  }
  return s;
}

double ValidatedNetwork::decay_rate(std::size_t i, std::size_t state) const {
  double s = nodes_[i].mu_exit;
  for (std::size_t li : out_links_[i]) {
    const auto& l = links_[li];
    s += link_up(l, state) ? l.mu : l.f * l.mu;
  }
  return s;
}

NetworkSpec ValidatedNetwork::to_spec() const {
  NetworkSpec spec;
  spec.nodes = nodes_;
  spec.blocks = blocks_;
  spec.links.reserve(links_.size());
  for (const auto& l : links_) spec.links.push_back(LinkSpec{l.from, l.to, l.mu, l.f, l.block, false});
  return spec;
}

}  // namespace qnet
