#include "qnet/analytic.hpp"
#include "qnet/errors.hpp"
#include "qnet/moments.hpp"
#include "qnet/networks.hpp"
#include "qnet/oracle.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace qnet;
using qnet::testing::load;

namespace {

double binomial(unsigned n, unsigned k) {
  double r = 1.0;
  for (unsigned i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST(MultiIndex, ColexOrderAndCardinality) {
  const auto l2 = enumerate_level(2, 2);
  ASSERT_EQ(l2.size(), 3U);
  EXPECT_EQ(l2[0], (MultiIndex{2, 0}));
  EXPECT_EQ(l2[1], (MultiIndex{1, 1}));
  EXPECT_EQ(l2[2], (MultiIndex{0, 2}));
  for (std::size_t d = 1; d <= 4; ++d) {
    for (unsigned r = 0; r <= 5; ++r) {
      const auto lv = enumerate_level(d, r);
      EXPECT_EQ(lv.size(), static_cast<std::size_t>(binomial(static_cast<unsigned>(d) + r - 1, r)));
      for (std::size_t a = 0; a < lv.size(); ++a) {
        unsigned sum = 0;
        for (unsigned x : lv[a]) sum += x;
        EXPECT_EQ(sum, r);
        if (a == 0) continue;
        // colex: compare from the last coordinate
        const auto& p = lv[a - 1];
        const auto& q = lv[a];
        std::size_t c = d;
        while (c > 0 && p[c - 1] == q[c - 1]) --c;
        ASSERT_GT(c, 0U);
        EXPECT_LT(p[c - 1], q[c - 1]);
      }
    }
  }
}

TEST(Moments, SingleNode) {
  auto [net, chain] = load("fix_a.json");
  const MomentTable t = stationary_factorial_moments(net, chain, 2);
  EXPECT_NEAR(t.total(t.queue_index({1})), 3.0, 1e-12);
  EXPECT_NEAR(t.total(t.queue_index({2})), 9.0, 1e-12);
  const CentralMoments c = central_moments(t);
  EXPECT_NEAR(c.variance[0], 3.0, 1e-12);
  for (double s : {0.0, 0.3, 1.0, 4.0}) {
    const FirstMoments v = transient_first_moments(net, chain, InitialCondition::empty(1), s);
    EXPECT_NEAR(v.means()[0], 3.0 * (1.0 - std::exp(-s)), 1e-12);
  }
}

TEST(Moments, TandemStationaryPerState) {
  auto [net, chain] = load("fix_b.json");
  const FirstMoments v = stationary_first_moments(net, chain);
  EXPECT_NEAR(v.v(0, 0), 0.5, 1e-13);
  EXPECT_NEAR(v.v(0, 1), 0.5, 1e-13);
  EXPECT_NEAR(v.v(1, 0), 1.0 / 6.0, 1e-13);
  EXPECT_NEAR(v.v(1, 1), 1.0 / 3.0, 1e-13);
  const MomentTable t = stationary_factorial_moments(net, chain, 1);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_NEAR(t.value(t.queue_index({1, 0}), k), v.v(0, k), 1e-13);
    EXPECT_NEAR(t.value(t.queue_index({0, 1}), k), v.v(1, k), 1e-13);
    EXPECT_NEAR(t.value(t.queue_index({0, 0}), k), 0.5, 1e-15);
  }
}

// The exact stationary mean of the fully symmetric f = 1 network is 1.4, not
// the mean-field value 4/3: on cyclic routes queue length and link state are
// correlated. The truncated chain settles it independently.
TEST(Moments, SymmetricNetworkExactMeanAgainstOracle) {
  auto [net, chain] = load("fix_c.json");
  const MomentTable t = stationary_factorial_moments(net, chain, 2);
  const TruncatedChain tc(net, chain, {18, 18, 18});
  const OracleDistribution d = oracle_stationary(tc);
  ASSERT_LT(d.boundary_mass(), 1e-10);
  for (std::size_t i = 0; i < 3; ++i) {
    MultiIndex r{0, 0, 0, 0};
    r[i + 1] = 1;
    EXPECT_NEAR(t.total(r), 1.4, 1e-12);
    EXPECT_NEAR(d.factorial_moment(r), 1.4, 1e-9);
  }
  EXPECT_NEAR(t.total(t.queue_index({1, 1, 0})), d.factorial_moment(MultiIndex{0, 1, 1, 0}), 1e-8);
  EXPECT_NEAR(t.total(t.queue_index({2, 0, 0})), d.factorial_moment(MultiIndex{0, 2, 0, 0}), 1e-8);
}

TEST(Moments, SymmetricNetworkTransientAgainstOracle) {
  auto [net, chain] = load("fix_c.json");
  const TruncatedChain tc(net, chain, {16, 16, 16});
  InitialCondition init = InitialCondition::empty(3);
  init.background = 1;
  for (double s : {0.5, 2.0}) {
    const FirstMoments v = transient_first_moments(net, chain, init, s);
    const OracleDistribution d = oracle_transient(tc, s, init);
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_NEAR(v.v(0, k), d.factorial_moment(MultiIndex{0, 1, 0, 0}, k), 1e-8);
    }
  }
}

TEST(Moments, SymmetricLossFreeMeanIgnoresLinkRates) {
  for (auto [q0, q1] : {std::pair{1.0, 1.0}, {1.0, 3.0}, {5.0, 0.2}, {0.05, 7.0}}) {
    const auto net = validate(networks::symmetric_complete(3, 2.0, 1.0, 1.0, q0, q1, 0.0));
    const auto chain = BackgroundChain::from_network(net);
    const Vector m = stationary_first_moments(net, chain).means();
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(m[i], 2.0, 1e-10);
  }
}

TEST(Moments, InitialCondition) {
  auto [net, chain] = load("fix_b.json");
  InitialCondition init{{3, 2}, 1};
  const FirstMoments v = transient_first_moments(net, chain, init, 0.0);
  EXPECT_DOUBLE_EQ(v.v(0, 1), 3.0);
  EXPECT_DOUBLE_EQ(v.v(1, 1), 2.0);
  EXPECT_DOUBLE_EQ(v.v(0, 0), 0.0);
  EXPECT_THROW(transient_first_moments(net, chain, init, -1.0), std::invalid_argument);
  EXPECT_THROW(transient_first_moments(net, chain, InitialCondition{{1}, 0}, 1.0), std::invalid_argument);
}

TEST(Moments, LevelZeroIsBackgroundLaw) {
  for (const auto& net : qnet::testing::random_networks(3, 11)) {
    const auto chain = BackgroundChain::from_network(net);
    InitialCondition init = InitialCondition::empty(net.node_count());
    init.background = 0;
    for (double s : {0.4, 1.7}) {
      const MomentTable t = transient_factorial_moments(net, chain, 2, s, init, false);
      const Vector row = chain.transition_matrix_expm(s).row(0).transpose();
      EXPECT_LT((t.level_values(0).row(0).transpose() - row).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Moments, TransientConvergesToStationary) {
  auto [net, chain] = load("fix_b.json");
  InitialCondition init{{4, 0}, 0};
  const double horizon = 50.0 / std::min(chain.spectral_gap(), 1.0);
  const MomentTable tr = transient_factorial_moments(net, chain, 2, horizon, init, false);
  const MomentTable st = stationary_factorial_moments(net, chain, 2);
  for (unsigned l = 0; l <= 2; ++l)
    EXPECT_LT((tr.level_values(l) - st.level_values(l)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Moments, Rk4AgreesWithExponential) {
  for (const auto& net : qnet::testing::random_networks(3, 5)) {
    const auto chain = BackgroundChain::from_network(net);
    InitialCondition init = InitialCondition::empty(net.node_count());
    init.counts[0] = 2;
    const MomentTable a = transient_factorial_moments(net, chain, 2, 1.5, init, true);
    const MomentTable b = transient_factorial_moments_rk4(net, chain, 2, 1.5, init, true, 1e-11);
    for (unsigned l = 0; l <= 2; ++l) {
      const double scale = std::max(1.0, a.level_values(l).cwiseAbs().maxCoeff());
      EXPECT_LT((a.level_values(l) - b.level_values(l)).cwiseAbs().maxCoeff() / scale, 1e-8);
    }
  }
}

TEST(Moments, LossMomentsAgainstLossTrackingOracle) {
  auto [net, chain] = load("fix_b.json");
  const TruncatedChain tc(net, chain, {16, 16}, 30U);
  const InitialCondition init = InitialCondition::empty(2);
  const double s = 2.0;
  const MomentTable t = transient_factorial_moments(net, chain, 2, s, init, true);
  const OracleDistribution d = oracle_transient(tc, s, init);
  for (unsigned l = 1; l <= 2; ++l) {
    for (const MultiIndex& r : t.level(l)) {
      for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_NEAR(t.value(r, k), d.factorial_moment(r, k), 1e-8)
            << "r=(" << r[0] << "," << r[1] << "," << r[2] << ") k=" << k;
      }
    }
  }
  EXPECT_NEAR(loss_mean(net, chain, s, init), d.factorial_moment(MultiIndex{1, 0, 0}), 1e-8);
}

TEST(Moments, LossMean) {
  auto [net, chain] = load("fix_b.json");
  const InitialCondition init = InitialCondition::empty(2);
  EXPECT_DOUBLE_EQ(loss_mean(net, chain, 0.0, init), 0.0);
  double prev = 0.0;
  for (double s = 0.25; s <= 8.0; s += 0.25) {
    const double l = loss_mean(net, chain, s, init);
    EXPECT_GE(l, prev - 1e-14);
    prev = l;
  }
  const double slope = (loss_mean(net, chain, 80.0, init) - loss_mean(net, chain, 40.0, init)) / 40.0;
  EXPECT_NEAR(slope, 0.5, 1e-10);

  auto [net0, chain0] = load("fix_b0.json");
  EXPECT_DOUBLE_EQ(loss_mean(net0, chain0, 5.0, init), 0.0);
}

TEST(Moments, CentralMomentsOfRetryTandem) {
  analytic::TandemParams p{20.0, 3.0, 2.0, 1.0, 1.0, 0.0};
  const auto net = validate(networks::tandem(p.lambda, p.mu1, p.mu2, p.q0, p.q1, p.f));
  const auto chain = BackgroundChain::from_network(net);
  const CentralMoments c = central_moments(stationary_factorial_moments(net, chain, 2));
  const auto law = analytic::TandemNode1Law::from(p);
  EXPECT_NEAR(c.mean[0], law.mean(), 1e-9);
  EXPECT_NEAR(c.variance[0], law.variance(), 1e-8);
  EXPECT_NEAR(c.covariance(0, 0), c.variance[0], 1e-12);
}

TEST(Moments, AlwaysUpNetworkHasIndependentMarginals) {
  NetworkSpec s = networks::symmetric_complete(3, 1.0, 0.8, 0.5, 1.0, 1.0, 1.0);
  for (auto& l : s.links) l.block.reset();
  const auto net = validate(s);
  const auto chain = BackgroundChain::from_network(net);
  const CentralMoments c = central_moments(stationary_factorial_moments(net, chain, 2));
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(c.variance[i], c.mean[i], 1e-10);
    for (Eigen::Index j = 0; j < 3; ++j)
      if (i != j) EXPECT_NEAR(c.covariance(i, j), 0.0, 1e-10);
  }
}

TEST(Moments, Errors) {
  auto [net, chain] = load("fix_a.json");
  EXPECT_THROW(central_moments(stationary_factorial_moments(net, chain, 1)), std::invalid_argument);

  NetworkSpec big = networks::tandem(1, 1, 1, 1, 1, 1);
  for (std::size_t b = 1; b < kMaxBlocks; ++b) big.blocks.push_back(BlockSpec{"b" + std::to_string(b), 1, 1});
  big.links[0].block = 0;
  const auto wide = validate(big);
  const auto wide_chain = BackgroundChain::from_network(wide);
  EXPECT_THROW(stationary_factorial_moments(wide, wide_chain, 2), CapacityError);
}
