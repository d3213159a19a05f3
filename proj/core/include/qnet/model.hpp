#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qnet {

inline constexpr std::size_t kMaxBlocks = 16;
inline constexpr double kStateSpaceWarning = 1e5;

struct NodeSpec {
  std::string name;
  double lambda = 0.0;   ///< external Poisson arrival rate
  double mu_exit = 0.0;  ///< per-customer rate of leaving the network

  bool operator==(const NodeSpec&) const = default;
};

/// A link between two nodes. `block == std::nullopt` means the link never fails.
/// A bidirectional link is shorthand for the two directed links i->j and j->i,
/// sharing rate, loss probability and block.
struct LinkSpec {
  std::size_t from = 0;
  std::size_t to = 0;
  double mu = 0.0;  ///< per-customer routing rate from `from` to `to`
  double f = 1.0;   ///< probability that a customer meeting a down link is lost
  std::optional<std::size_t> block;
  bool bidirectional = false;

  bool operator==(const LinkSpec&) const = default;
};

/// Up/down alternation of a group of links. Down-times are Exp(q0), up-times Exp(q1).
struct BlockSpec {
  std::string name;
  double q0 = 1.0;  ///< down -> up rate
  double q1 = 1.0;  ///< up -> down rate

  bool operator==(const BlockSpec&) const = default;
};

struct NetworkSpec {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  std::vector<BlockSpec> blocks;

  bool operator==(const NetworkSpec&) const = default;
};

enum class Violation {
  EmptyNetwork,
  InvalidNode,
  SelfLoop,
  NegativeRate,
  NonFiniteValue,
  LossProbabilityOutOfRange,
  NonPositiveBlockRate,
  MissingBlock,
  DuplicateLink,
  TooManyBlocks,
  NoExitNode,
  UnreachableExit,
};

std::string_view to_string(Violation v);

class ValidationError : public std::runtime_error {
 public:
  ValidationError(Violation v, const std::string& detail);
  Violation violation() const noexcept { return violation_; }

 private:
  Violation violation_;
};

/// Per-customer rates at node i while the background is in state k.
/// jump[j] + loss + exit + retry == mu_i.
struct RateBundle {
  std::vector<double> jump;
  double loss = 0.0;
  double exit = 0.0;
  double retry = 0.0;

  double jump_total() const;
  double total() const { return jump_total() + loss + exit + retry; }
};

/// True when block `block` (0-based) is up in background state `state`.
/// Block b occupies bit (K-1-b) of the state index, so block 0 is the most
/// significant bit, matching I_{2^{k-1}} (x) Q^(k) (x) I_{2^{K-k}} ordering.
constexpr bool block_up(std::size_t block, std::size_t state, std::size_t block_count) {
  return ((state >> (block_count - 1 - block)) & 1U) != 0;
}

struct DirectedLink {
  std::size_t from = 0;
  std::size_t to = 0;
  double mu = 0.0;
  double f = 1.0;
  std::optional<std::size_t> block;
};

class ValidatedNetwork;
ValidatedNetwork validate(const NetworkSpec& spec);

/// Immutable, normalized network: links are directed and unique.
class ValidatedNetwork {
 public:
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t block_count() const { return blocks_.size(); }
  std::size_t state_count() const { return std::size_t{1} << blocks_.size(); }

  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  const std::vector<DirectedLink>& links() const { return links_; }
  const std::vector<BlockSpec>& blocks() const { return blocks_; }
  const std::vector<std::size_t>& out_links(std::size_t i) const { return out_links_.at(i); }

  double lambda(std::size_t i) const { return nodes_.at(i).lambda; }
  double total_arrival_rate() const;
  double mu_exit(std::size_t i) const { return nodes_.at(i).mu_exit; }
  /// nu_i: total routing rate towards other nodes.
  double nu(std::size_t i) const { return nu_.at(i); }
  /// mu_i = mu_exit + nu_i.
  double mu_total(std::size_t i) const { return nu_.at(i) + nodes_.at(i).mu_exit; }
  double mu(std::size_t i, std::size_t j) const;
  double routing_probability(std::size_t i, std::size_t j) const;
  std::optional<std::size_t> link_index(std::size_t i, std::size_t j) const;

  /// Throws std::out_of_range for undeclared links or an invalid state.
  bool link_indicator(std::size_t i, std::size_t j, std::size_t state) const;
  bool link_up(const DirectedLink& link, std::size_t state) const {
    return !link.block || block_up(*link.block, state, blocks_.size());
  }

  RateBundle effective_rates(std::size_t i, std::size_t state) const;
  /// Sum_j f_ij mu_ij over down links: rate at which one customer is lost.
  double loss_rate(std::size_t i, std::size_t state) const;
  /// Sum_j (1 - f_ij) mu_ij over down links: null (retry) event rate.
  double retry_rate(std::size_t i, std::size_t state) const;
  /// Rate at which one customer leaves node i in state k: exit + jumps + losses.
  double decay_rate(std::size_t i, std::size_t state) const;

  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Directed, normalized spec; validate(to_spec()) reproduces *this.
  NetworkSpec to_spec() const;

  bool operator==(const ValidatedNetwork& other) const { return to_spec() == other.to_spec(); }

 private:
  friend ValidatedNetwork validate(const NetworkSpec& spec);
  ValidatedNetwork() = default;

  std::vector<NodeSpec> nodes_;
  std::vector<DirectedLink> links_;
  std::vector<BlockSpec> blocks_;
  std::vector<std::vector<std::size_t>> out_links_;
  std::vector<double> nu_;
  std::vector<std::string> warnings_;
};

}  // namespace qnet
