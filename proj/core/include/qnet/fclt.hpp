#pragma once

#include "qnet/background.hpp"
#include "qnet/linalg.hpp"
#include "qnet/model.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace qnet {

/// Speed of the link dynamics relative to arrivals under q -> N^alpha q.
enum class Regime {
  LT1,  ///< slow links: modulation noise only
  EQ1,  ///< modulation noise plus Poisson noise diag(rho)
  GT1,  ///< fast links: diag(rho) only
};

std::string_view to_string(Regime r);
/// Accepts "lt1", "eq1", "gt1" in any case.
Regime parse_regime(std::string_view text);

/// Averaged drift and fluid path of the scaled network.
class FluidModel {
 public:
  FluidModel(const ValidatedNetwork& net, const BackgroundChain& chain);

  std::size_t node_count() const { return static_cast<std::size_t>(drift_.rows()); }
  /// M(i,j) = mean rate j -> i for i != j; M(i,i) = -mean total leaving rate of i.
  const Matrix& drift() const { return drift_; }
  const Vector& arrivals() const { return lambda_; }
  const Matrix& sigma() const { return sigma_; }

  /// rho(t) from rho0 (zero when empty).
  Vector rho(double t, const Vector& rho0 = Vector()) const;
  /// -M^{-1} lambda; throws NumericalError when M is singular.
  Vector rho_stationary() const;
  /// n x states matrix with entries sum_{j != i} rho_j mu+_jik - rho_i decay(i,k).
  Matrix modulation(const Vector& rho) const;
  /// Raw martingale diffusion matrix at fluid level rho.
  Matrix diffusion(const Vector& rho) const;

  /// exp([[M, lambda], [0, 0]] h): advances (rho, 1) exactly by h.
  Matrix fluid_propagator(double h) const;

  /// Characteristic time used to pick the integration step.
  double time_scale() const;

 private:
  std::size_t states_;
  Matrix drift_;
  Vector lambda_;
  Matrix sigma_;
  std::vector<Matrix> inflow_;  ///< per state k: (to, from) -> up-link rate
  Matrix decay_;                ///< n x states
};

struct FcltCovariance {
  Regime regime = Regime::EQ1;
  double t = 0.0;
  Vector rho;
  Matrix cov;
  Matrix modulation;  ///< at time t
};

Vector fluid_limit(const ValidatedNetwork& net, const BackgroundChain& chain, double t,
                   const Vector& rho0 = Vector());
Matrix modulation_matrix(const ValidatedNetwork& net, const BackgroundChain& chain, double t);

/// Empty-start covariance. The modulation integral is integrated by RK4 with
/// step time_scale()/200 and checked against half steps.
FcltCovariance fclt_covariance(const ValidatedNetwork& net, const BackgroundChain& chain, double t, Regime regime);

/// Integrates C' = MC + CM^T + M°SM°^T + G(s) with the raw diffusion matrix G.
Matrix fclt_covariance_full(const ValidatedNetwork& net, const BackgroundChain& chain, double t);

/// t -> infinity limit from the algebraic Lyapunov equation at rho*.
Matrix fclt_covariance_stationary(const ValidatedNetwork& net, const BackgroundChain& chain, Regime regime);

struct GaussianApprox {
  Vector mean;
  Matrix cov;
};

/// Mean N rho(t), covariance N Cov(t).
GaussianApprox gaussian_approx(const ValidatedNetwork& net, const BackgroundChain& chain, double t, double n_scale,
                               Regime regime);

}  // namespace qnet
