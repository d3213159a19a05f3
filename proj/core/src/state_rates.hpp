#pragma once

#include "qnet/model.hpp"

#include <cstddef>
#include <vector>

namespace qnet::detail {

/// Per-(node, background state) rates, flattened as [i * states + k].
struct StateRates {
  struct Jump {
    std::size_t from;
    std::size_t to;
    double rate;
  };

  std::size_t nodes = 0;
  std::size_t states = 0;
  std::vector<double> decay;
  std::vector<double> loss;
  std::vector<double> retry;
  std::vector<std::vector<Jump>> jumps;  ///< per state, links that are up with mu > 0

  explicit StateRates(const ValidatedNetwork& net) : nodes(net.node_count()), states(net.state_count()) {
    decay.resize(nodes * states);
    loss.resize(nodes * states);
    retry.resize(nodes * states);
    jumps.resize(states);
    for (std::size_t k = 0; k < states; ++k) {
      for (std::size_t i = 0; i < nodes; ++i) {
        decay[i * states + k] = net.decay_rate(i, k);
        loss[i * states + k] = net.loss_rate(i, k);
        retry[i * states + k] = net.retry_rate(i, k);
      }
      for (const auto& l : net.links()) {
        if (l.mu > 0.0 && net.link_up(l, k)) jumps[k].push_back(Jump{l.from, l.to, l.mu});
      }
    }
  }

  double decay_at(std::size_t i, std::size_t k) const { return decay[i * states + k]; }
  double loss_at(std::size_t i, std::size_t k) const { return loss[i * states + k]; }
  double retry_at(std::size_t i, std::size_t k) const { return retry[i * states + k]; }
};

}  // namespace qnet::detail
