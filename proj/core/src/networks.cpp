#include "qnet/networks.hpp"

#include <string>

namespace qnet::networks {

namespace {

NodeSpec node(std::size_t i, double lambda, double mu_exit) {
  return NodeSpec{"n" + std::to_string(i + 1), lambda, mu_exit};
}

}  // namespace

NetworkSpec single_node(double lambda, double mu_exit) {
  NetworkSpec s;
  s.nodes.push_back(node(0, lambda, mu_exit));
  return s;
}

NetworkSpec tandem(double lambda, double mu1, double mu2, double q0, double q1, double f) {
  NetworkSpec s;
  s.nodes = {node(0, lambda, 0.0), node(1, 0.0, mu2)};
  s.blocks = {BlockSpec{"b1", q0, q1}};
  s.links = {LinkSpec{0, 1, mu1, f, 0, false}};
  return s;
}

NetworkSpec symmetric_complete(std::size_t n, double lambda, double nu, double mu0, double q0, double q1,
                               double f) {
  NetworkSpec s;
  for (std::size_t i = 0; i < n; ++i) s.nodes.push_back(node(i, lambda, mu0));
  s.blocks = {BlockSpec{"b1", q0, q1}};
  const double rate = n > 1 ? nu / static_cast<double>(n - 1) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) s.links.push_back(LinkSpec{i, j, rate, f, 0, false});
    }
  }
  return s;
}

NetworkSpec ring(std::size_t n, double lambda, double nu, double mu0, double q0, double q1, double f) {
  NetworkSpec s;
  for (std::size_t i = 0; i < n; ++i) s.nodes.push_back(node(i, lambda, mu0));
  s.blocks = {BlockSpec{"b1", q0, q1}};
  for (std::size_t i = 0; i < n; ++i) s.links.push_back(LinkSpec{i, (i + 1) % n, nu, f, 0, false});
  return s;
}

}  // namespace qnet::networks
