#include "qnet/fclt.hpp"

#include "qnet/errors.hpp"
#include "state_rates.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qnet {

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::LT1: return "lt1";
    case Regime::EQ1: return "eq1";
    case Regime::GT1: return "gt1";
  }
  return "eq1";
}

Regime parse_regime(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "lt1") return Regime::LT1;
  if (s == "eq1") return Regime::EQ1;
  if (s == "gt1") return Regime::GT1;
  throw std::invalid_argument("unknown regime '" + std::string(text) + "' (expected lt1, eq1 or gt1)");
}

FluidModel::FluidModel(const ValidatedNetwork& net, const BackgroundChain& chain) : states_(chain.state_count()) {
  if (chain.state_count() != net.state_count()) {
    throw std::invalid_argument("background chain does not match the network's blocks");
  }
  const detail::StateRates rates(net);
  const auto n = static_cast<Eigen::Index>(net.node_count());
  const auto s = static_cast<Eigen::Index>(states_);
  const Vector& pi = chain.stationary();
  lambda_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) lambda_[i] = net.lambda(static_cast<std::size_t>(i));
  decay_.resize(n, s);
  inflow_.assign(states_, Matrix::Zero(n, n));
  drift_ = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < s; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) decay_(i, k) = rates.decay_at(static_cast<std::size_t>(i), static_cast<std::size_t>(k));
    for (const auto& jump : rates.jumps[static_cast<std::size_t>(k)]) {
      inflow_[static_cast<std::size_t>(k)](static_cast<Eigen::Index>(jump.to), static_cast<Eigen::Index>(jump.from)) += jump.rate;
    }
    drift_ += pi[k] * inflow_[static_cast<std::size_t>(k)];
  }
  drift_.diagonal() -= decay_ * pi;
  sigma_ = chain.fclt_sigma();
}

Matrix FluidModel::fluid_propagator(double h) const {
  const Eigen::Index n = drift_.rows();
  Matrix aug = Matrix::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = drift_;
  aug.topRightCorner(n, 1) = lambda_;
  return expm(aug * h);
}

Vector FluidModel::rho(double t, const Vector& rho0) const {
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("time must be finite and non-negative");
  const Eigen::Index n = drift_.rows();
  Vector y = Vector::Zero(n + 1);
  if (rho0.size() == n) {
    y.head(n) = rho0;
  } else if (rho0.size() != 0) {
    throw std::invalid_argument("initial fluid vector has the wrong length");
  }
  y[n] = 1.0;
  return (fluid_propagator(t) * y).head(n);
}

Vector FluidModel::rho_stationary() const {
  return -solve_dense(drift_, lambda_, "stationary fluid point (drift matrix singular: network unstable)");
}

Matrix FluidModel::modulation(const Vector& rho) const {
  Matrix m(drift_.rows(), static_cast<Eigen::Index>(states_));
  for (std::size_t k = 0; k < states_; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    m.col(kk) = inflow_[k] * rho - decay_.col(kk).cwiseProduct(rho);
  }
  return m;
}

Matrix FluidModel::diffusion(const Vector& rho) const {
  // Off-diagonal mean rates and mean total leaving rates.
  const Eigen::Index n = drift_.rows();
  Matrix g = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double inflow = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) inflow += rho[j] * drift_(i, j);
    }
    g(i, i) = lambda_[i] + inflow - rho[i] * drift_(i, i);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) g(i, j) = -rho[i] * drift_(j, i) - rho[j] * drift_(i, j);
    }
  }
  return g;
}

double FluidModel::time_scale() const {
  double rate = drift_.cwiseAbs().rowwise().sum().maxCoeff();
  if (!(rate > 0.0)) rate = 1.0;
  return 1.0 / rate;
}

namespace {

/// RK4 for C' = MC + CM^T + F(rho(s)), C(0) = 0, rho advanced exactly.
template <typename Forcing>
Matrix integrate_lyapunov(const FluidModel& fm, double t, long steps, Forcing forcing) {
  const Eigen::Index n = fm.drift().rows();
  const Matrix& m = fm.drift();
  const double h = t / static_cast<double>(steps);
  const Matrix half = fm.fluid_propagator(0.5 * h);
  Vector y = Vector::Zero(n + 1);
  y[n] = 1.0;
  Matrix c = Matrix::Zero(n, n);
  auto lyap = [&](const Matrix& x) -> Matrix { return m * x + x * m.transpose(); };
  for (long step = 0; step < steps; ++step) {
    const Vector y_mid = half * y;
    const Vector y_end = half * y_mid;
    const Matrix f0 = forcing(Vector(y.head(n)));
    const Matrix fm_mid = forcing(Vector(y_mid.head(n)));
    const Matrix f1 = forcing(Vector(y_end.head(n)));
    const Matrix k1 = lyap(c) + f0;
    const Matrix k2 = lyap(c + 0.5 * h * k1) + fm_mid;
    const Matrix k3 = lyap(c + 0.5 * h * k2) + fm_mid;
    const Matrix k4 = lyap(c + h * k3) + f1;
    c += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    y = y_end;
  }
  return 0.5 * (c + c.transpose());
}

template <typename Forcing>
Matrix integrate_checked(const FluidModel& fm, double t, Forcing forcing) {
  const Eigen::Index n = fm.drift().rows();
  if (t == 0.0) return Matrix::Zero(n, n);
  const double h0 = fm.time_scale() / 200.0;
  const long steps = std::max(1L, static_cast<long>(std::ceil(t / h0)));
  const Matrix coarse = integrate_lyapunov(fm, t, steps, forcing);
  const Matrix fine = integrate_lyapunov(fm, t, 2 * steps, forcing);
  const double scale = fine.cwiseAbs().maxCoeff();
  const double diff = (fine - coarse).cwiseAbs().maxCoeff();
  if (scale > 0.0 && diff > 1e-6 * scale) {
    throw NumericalError("covariance integration disagrees under step halving (relative " +
                         std::to_string(diff / scale) + ")");
  }
  // Richardson extrapolation for a fourth-order method.
  return (16.0 * fine - coarse) / 15.0;
}

}  // namespace

Vector fluid_limit(const ValidatedNetwork& net, const BackgroundChain& chain, double t, const Vector& rho0) {
  return FluidModel(net, chain).rho(t, rho0);
}

Matrix modulation_matrix(const ValidatedNetwork& net, const BackgroundChain& chain, double t) {
  const FluidModel fm(net, chain);
  return fm.modulation(fm.rho(t));
}

FcltCovariance fclt_covariance(const ValidatedNetwork& net, const BackgroundChain& chain, double t, Regime regime) {
  const FluidModel fm(net, chain);
  FcltCovariance out;
  out.regime = regime;
  out.t = t;
  out.rho = fm.rho(t);
  out.modulation = fm.modulation(out.rho);
  const Eigen::Index n = fm.drift().rows();
  out.cov = Matrix::Zero(n, n);
  if (regime != Regime::GT1) {
    const Matrix& sigma = fm.sigma();
    out.cov = integrate_checked(fm, t, [&](const Vector& rho) {
      const Matrix mo = fm.modulation(rho);
      return Matrix(mo * sigma * mo.transpose());
    });
  }
  if (regime != Regime::LT1) out.cov.diagonal() += out.rho;
  return out;
}

Matrix fclt_covariance_full(const ValidatedNetwork& net, const BackgroundChain& chain, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("time must be finite and non-negative");
  const FluidModel fm(net, chain);
  const Matrix& sigma = fm.sigma();
  return integrate_checked(fm, t, [&](const Vector& rho) {
    const Matrix mo = fm.modulation(rho);
    return Matrix(mo * sigma * mo.transpose() + fm.diffusion(rho));
  });
}

Matrix fclt_covariance_stationary(const ValidatedNetwork& net, const BackgroundChain& chain, Regime regime) {
  const FluidModel fm(net, chain);
  const Vector rho = fm.rho_stationary();
  const Eigen::Index n = fm.drift().rows();
  Matrix cov = Matrix::Zero(n, n);
  if (regime != Regime::GT1) {
    // M C + C M^T = -F as an n^2 system: (I (x) M + M (x) I) vec(C) = -vec(F).
    const Matrix mo = fm.modulation(rho);
    const Matrix f = mo * fm.sigma() * mo.transpose();
    const Matrix id = Matrix::Identity(n, n);
    Matrix big(n * n, n * n);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = 0; b < n; ++b) {
        big.block(a * n, b * n, n, n) = id(a, b) * fm.drift() + fm.drift()(a, b) * id;
      }
    }
    const Vector rhs = -Eigen::Map<const Vector>(f.data(), n * n);
    const Vector x = solve_dense(big, rhs, "stationary Lyapunov equation");
    cov = Eigen::Map<const Matrix>(x.data(), n, n);
    cov = 0.5 * (cov + cov.transpose());
  }
  if (regime != Regime::LT1) cov.diagonal() += rho;
  return cov;
}

GaussianApprox gaussian_approx(const ValidatedNetwork& net, const BackgroundChain& chain, double t, double n_scale,
                               Regime regime) {
  if (!(n_scale >= 1.0)) throw std::invalid_argument("scaling N must be at least 1");
  const FcltCovariance c = fclt_covariance(net, chain, t, regime);
  return GaussianApprox{n_scale * c.rho, n_scale * c.cov};
}

}  // namespace qnet
