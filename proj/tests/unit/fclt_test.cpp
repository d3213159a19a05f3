#include "qnet/analytic.hpp"
#include "qnet/fclt.hpp"
#include "qnet/moments.hpp"
#include "qnet/networks.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace qnet;
using qnet::testing::load;

TEST(Fclt, RegimeParsing) {
  EXPECT_EQ(parse_regime("lt1"), Regime::LT1);
  EXPECT_EQ(parse_regime("EQ1"), Regime::EQ1);
  EXPECT_EQ(parse_regime("Gt1"), Regime::GT1);
  EXPECT_EQ(to_string(Regime::EQ1), "eq1");
  EXPECT_THROW(parse_regime("alpha"), std::invalid_argument);
}

TEST(Fclt, SymmetricFluidPath) {
  auto [net, chain] = load("fix_c.json");
  const double kappa = 1.5;
  EXPECT_EQ(fluid_limit(net, chain, 0.0).cwiseAbs().maxCoeff(), 0.0);
  for (double t : {0.2, 1.0, 3.0}) {
    const Vector rho = fluid_limit(net, chain, t);
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(rho[i], (2.0 / kappa) * (1.0 - std::exp(-kappa * t)), 1e-12);
  }
  const FluidModel fm(net, chain);
  EXPECT_LT((fm.rho_stationary() - Vector::Constant(3, 4.0 / 3.0)).cwiseAbs().maxCoeff(), 1e-12);
  const Vector ones = Vector::Ones(3);
  for (double t : {0.5, 2.0}) {
    const Matrix e = expm(fm.drift() * t);
    EXPECT_LT((e * ones - std::exp(-kappa * t) * ones).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Fclt, TandemFluidPath) {
  const auto net = validate(networks::tandem(25, 10, 20, 30, 20, 0.0));
  const auto chain = BackgroundChain::from_network(net);
  const double kappa = 10.0 * 0.6;
  for (double t : {0.1, 0.5, 1.0}) {
    EXPECT_NEAR(fluid_limit(net, chain, t)[0], (25.0 / kappa) * (1.0 - std::exp(-kappa * t)), 1e-12);
  }
  const Vector rho0 = Vector::Constant(2, 3.0);
  const FluidModel fm(net, chain);
  EXPECT_LT((fm.rho(0.0, rho0) - rho0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Fclt, RingFluidDecaysAtKappa) {
  // Ring: every node routes to the next at rate nu on one block, f = 1.
  const double nu = 1.3, mu0 = 0.4, q0 = 0.8, q1 = 1.7;
  const auto net = validate(networks::ring(4, 1.0, nu, mu0, q0, q1, 1.0));
  const auto chain = BackgroundChain::from_network(net);
  const double kappa = nu * (1.0 - q0 / (q0 + q1)) + mu0;
  const FluidModel fm(net, chain);
  const Vector ones = Vector::Ones(4);
  for (double t : {0.3, 1.0, 4.0}) {
    EXPECT_LT((expm(fm.drift() * t) * ones - std::exp(-kappa * t) * ones).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Fclt, ModulationMatrices) {
  auto [net, chain] = load("fix_b.json");
  EXPECT_EQ(modulation_matrix(net, chain, 0.0).cwiseAbs().maxCoeff(), 0.0);
  const double t = 0.8;
  const Vector rho = fluid_limit(net, chain, t);
  Matrix expected(2, 2);
  expected << -rho[0], -rho[0], -rho[1], rho[0] - rho[1];
  EXPECT_LT((modulation_matrix(net, chain, t) - expected).cwiseAbs().maxCoeff(), 1e-14);

  auto [c, cchain] = load("fix_c.json");
  const Vector r = fluid_limit(c, cchain, t);
  const Matrix m = modulation_matrix(c, cchain, t);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_NEAR(m(i, 0), -r[i] * 2.0, 1e-13);
    EXPECT_NEAR(m(i, 1), -r[i] * 1.0, 1e-13);
  }
}

TEST(Fclt, SymmetricCovariance) {
  auto [net, chain] = load("fix_c.json");
  const analytic::SymmetricSpec spec{};
  EXPECT_EQ(fclt_covariance(net, chain, 0.0, Regime::EQ1).cov.cwiseAbs().maxCoeff(), 0.0);
  const Matrix e3 = Matrix::Ones(3, 3);
  for (double t : {0.25, 1.0, 2.5, 5.0}) {
    const FcltCovariance lt = fclt_covariance(net, chain, t, Regime::LT1);
    EXPECT_LT((lt.cov - analytic::symmetric_fclt_xi(spec, t) * e3).cwiseAbs().maxCoeff(), 1e-8) << t;
    const FcltCovariance eq = fclt_covariance(net, chain, t, Regime::EQ1);
    EXPECT_LT((eq.cov - lt.cov - Matrix(eq.rho.asDiagonal())).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_TRUE(is_symmetric_psd(eq.cov, 1e-10));
  }
  const Matrix limit = (4.0 / 27.0) * e3 + (4.0 / 3.0) * Matrix::Identity(3, 3);
  EXPECT_LT((fclt_covariance_stationary(net, chain, Regime::EQ1) - limit).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((fclt_covariance(net, chain, 30.0, Regime::EQ1).cov - limit).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Fclt, FastRegimeIsDiagonal) {
  const auto net = validate(networks::tandem(25, 10, 20, 30, 20, 0.0));
  const auto chain = BackgroundChain::from_network(net);
  const FcltCovariance gt = fclt_covariance(net, chain, 1.0, Regime::GT1);
  EXPECT_EQ(gt.cov, Matrix(gt.rho.asDiagonal()));
  const GaussianApprox g = gaussian_approx(net, chain, 1.0, 100.0, Regime::GT1);
  EXPECT_LT((g.mean - 100.0 * fluid_limit(net, chain, 1.0)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(g.cov(0, 1), 0.0);
  const GaussianApprox zero = gaussian_approx(net, chain, 0.0, 1.0, Regime::EQ1);
  EXPECT_EQ(zero.mean.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(zero.cov.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(gaussian_approx(net, chain, 1.0, 0.5, Regime::EQ1), std::invalid_argument);
}

TEST(Fclt, CompactFormulaMatchesFullLyapunov) {
  for (const char* name : {"fix_b.json", "fix_c.json", "fix_tandem_paper.json"}) {
    auto [net, chain] = load(name);
    for (double t : {0.5, 2.0}) {
      const Matrix compact = fclt_covariance(net, chain, t, Regime::EQ1).cov;
      const Matrix full = fclt_covariance_full(net, chain, t);
      EXPECT_LT((compact - full).cwiseAbs().maxCoeff(), 1e-6) << name << " t=" << t;
    }
  }
}

TEST(Fclt, StationaryFluidEqualsTandemMean) {
  for (double q1 : {0.2, 1.1, 6.0}) {
    const auto net = validate(networks::tandem(3, 1.5, 2, 0.7, q1, 1.0));
    const auto chain = BackgroundChain::from_network(net);
    const Vector rho = FluidModel(net, chain).rho_stationary();
    const Vector mean = stationary_first_moments(net, chain).means();
    EXPECT_LT((rho - mean).cwiseAbs().maxCoeff(), 1e-10) << "q1=" << q1;
  }
}

TEST(Fclt, CovariancePsdOnRandomNetworks) {
  for (const auto& net : qnet::testing::random_networks(4, 31)) {
    const auto chain = BackgroundChain::from_network(net);
    for (double t : {0.5, 3.0}) {
      const FcltCovariance c = fclt_covariance(net, chain, t, Regime::EQ1);
      EXPECT_TRUE(is_symmetric_psd(c.cov, 1e-10));
      EXPECT_GE(c.rho.minCoeff(), 0.0);
    }
  }
}
