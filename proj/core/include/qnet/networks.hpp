#pragma once

#include "qnet/model.hpp"

#include <cstddef>

namespace qnet::networks {

/// One M/M/inf node, no links, no blocks.
NetworkSpec single_node(double lambda, double mu_exit);

/// Arrivals at node 1, link 1->2 on one block, exits from node 2 only.
NetworkSpec tandem(double lambda, double mu1, double mu2, double q0, double q1, double f);

/// n nodes, each with arrival rate lambda and exit rate mu0; every ordered pair
/// (i,j) has rate nu/(n-1) and loss probability f; all links share one block.
NetworkSpec symmetric_complete(std::size_t n, double lambda, double nu, double mu0, double q0, double q1,
                               double f);

/// Directed ring i -> i+1 (mod n) with rate nu, all on one block.
NetworkSpec ring(std::size_t n, double lambda, double nu, double mu0, double q0, double q1, double f);

}  // namespace qnet::networks
