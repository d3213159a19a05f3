#include "qnet/analytic.hpp"

#include "qnet/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace qnet::analytic {

namespace {

void require_symmetric(const SymmetricSpec& s) {
  if (s.n < 2 || !(s.lambda >= 0.0) || !(s.nu > 0.0) || !(s.mu0 > 0.0) || !(s.q0 > 0.0) || !(s.q1 > 0.0)) {
    throw std::invalid_argument("symmetric network needs n >= 2 and positive rates");
  }
  if (s.f != 0.0 && s.f != 1.0) throw std::invalid_argument("symmetric closed forms cover f = 0 and f = 1 only");
}

void require_retry_tandem(const TandemParams& p) {
  if (p.f != 0.0) throw std::invalid_argument("node-1 law is only available for f = 0");
  if (!(p.lambda >= 0.0) || !(p.mu1 > 0.0) || !(p.q0 > 0.0) || !(p.q1 >= 0.0)) {
    throw std::invalid_argument("tandem rates out of range");
  }
}

/// Length after which the pmf's remaining mass is below `tail`.
template <typename Pmf>
std::size_t support_length(Pmf pmf, double mean, double tail) {
  double mass = 0.0;
  std::size_t k = 0;
  while (true) {
    mass += pmf(k);
    ++k;
    if (static_cast<double>(k) > mean && 1.0 - mass < tail) return k;
    if (k > 50'000'000) throw NumericalError("pmf support does not close");
  }
}

}  // namespace

double symmetric_mean(const SymmetricSpec& s, std::optional<double> t) {
  require_symmetric(s);
  const double rate = s.f == 1.0 ? s.kappa() : s.mu0;
  const double level = s.lambda / rate;
  if (!t) return level;
  if (*t < 0.0) throw std::invalid_argument("time must be non-negative");
  return level * (1.0 - std::exp(-rate * *t));
}

double symmetric_fclt_xi(const SymmetricSpec& s, double t) {
  require_symmetric(s);
  if (s.f != 1.0) throw std::invalid_argument("xi is derived for f = 1");
  if (t < 0.0) throw std::invalid_argument("time must be non-negative");
  const double k = s.kappa();
  const double q = s.q();
  const double pre = 2.0 * s.q0 * s.q1 * s.lambda * s.lambda * s.nu * s.nu / (k * k * q * q * q);
  const double e1 = std::exp(-k * t);
  const double e2 = e1 * e1;
  return pre * ((1.0 - e2) / (2.0 * k) - 2.0 * e1 * (1.0 - e1) / k + t * e2);
}

double symmetric_fclt_xi_limit(const SymmetricSpec& s) {
  require_symmetric(s);
  const double k = s.kappa();
  const double q = s.q();
  return s.q0 * s.q1 * s.lambda * s.lambda * s.nu * s.nu / (k * k * k * q * q * q);
}

TandemMeans tandem_stationary_means(const TandemParams& p) {
  // Row vector x solves x (D - Q) = b for 2x2 D diagonal, Q = [[-q0, q0], [q1, -q1]].
  auto solve = [&](double d0, double d1, double b0, double b1, double& x0, double& x1) {
    const double a00 = d0 + p.q0, a01 = -p.q0, a10 = -p.q1, a11 = d1 + p.q1;
    const double det = a00 * a11 - a01 * a10;
    if (!(std::abs(det) > 0.0) || !std::isfinite(det)) throw NumericalError("tandem 2x2 system is singular");
    // x A = b  <=>  A^T x^T = b^T.
    x0 = (b0 * a11 - b1 * a10) / det;
    x1 = (b1 * a00 - b0 * a01) / det;
  };
  const double pi_up = p.q0 / (p.q0 + p.q1);
  TandemMeans m;
  solve(p.f * p.mu1, p.mu1, p.lambda * (1.0 - pi_up), p.lambda * pi_up, m.v10, m.v11);
  solve(p.mu2, p.mu2, 0.0, p.mu1 * m.v11, m.v20, m.v21);
  m.loss_rate = p.f * p.mu1 * m.v10;
  return m;
}

TandemNode1Law TandemNode1Law::from(const TandemParams& p) {
  require_retry_tandem(p);
  TandemNode1Law law;
  law.poisson_mean = p.lambda / p.mu1;
  law.p = p.q0 / (p.q0 + p.lambda);
  law.shape = p.q1 / p.mu1 + 1.0;
  law.w_down = p.q1 / (p.q0 + p.q1);
  law.w_up = p.q0 / (p.q0 + p.q1);
  return law;
}

double TandemNode1Law::mean() const {
  const double odds = (1.0 - p) / p;
  return poisson_mean + w_down * shape * odds + w_up * (shape - 1.0) * odds;
}

double TandemNode1Law::variance() const {
  const double odds = (1.0 - p) / p;
  const double m_down = shape * odds;
  const double m_up = (shape - 1.0) * odds;
  const double v_down = shape * odds / p;
  const double v_up = (shape - 1.0) * odds / p;
  const double mb = w_down * m_down + w_up * m_up;
  const double second = w_down * (v_down + m_down * m_down) + w_up * (v_up + m_up * m_up);
  return poisson_mean + second - mb * mb;
}

double tandem_node1_pgf(const TandemParams& p, double z) {
  const TandemNode1Law law = TandemNode1Law::from(p);
  if (!(std::abs(z) <= 1.0)) throw std::domain_error("pgf argument must satisfy |z| <= 1");
  const double base_den = p.q0 + p.lambda * (1.0 - z);
  if (!(base_den > 0.0)) throw std::domain_error("pgf needs q0 + lambda (1 - z) > 0");
  const double base = p.q0 / base_den;
  return std::exp(law.poisson_mean * (z - 1.0)) *
         (law.w_down * std::pow(base, law.shape) + law.w_up * std::pow(base, law.shape - 1.0));
}

double poisson_pmf(double mean, std::size_t k) {
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  const double kd = static_cast<double>(k);
  return std::exp(-mean + kd * std::log(mean) - std::lgamma(kd + 1.0));
}

double negative_binomial_pmf(double r, double p, std::size_t k) {
  if (r == 0.0 || p == 1.0) return k == 0 ? 1.0 : 0.0;
  const double kd = static_cast<double>(k);
  return std::exp(std::lgamma(kd + r) - std::lgamma(r) - std::lgamma(kd + 1.0) + r * std::log(p) +
                  kd * std::log1p(-p));
}

std::vector<double> tandem_node1_pmf_table(const TandemParams& p, double tail) {
  const TandemNode1Law law = TandemNode1Law::from(p);
  auto b_pmf = [&](std::size_t k) {
    return law.w_down * negative_binomial_pmf(law.shape, law.p, k) +
           law.w_up * negative_binomial_pmf(law.shape - 1.0, law.p, k);
  };
  const double b_mean = law.mean() - law.poisson_mean;
  const std::size_t la = support_length([&](std::size_t k) { return poisson_pmf(law.poisson_mean, k); },
                                        law.poisson_mean, 0.5 * tail);
  const std::size_t lb = support_length(b_pmf, b_mean, 0.5 * tail);
  const std::size_t len = la + lb;
  std::vector<double> a(len), b(len), out(len, 0.0);
  for (std::size_t k = 0; k < len; ++k) {
    a[k] = poisson_pmf(law.poisson_mean, k);
    b[k] = b_pmf(k);
  }
  for (std::size_t m = 0; m < len; ++m) {
    double s = 0.0;
    for (std::size_t j = 0; j <= m; ++j) s += a[j] * b[m - j];
    out[m] = s;
  }
  return out;
}

double tandem_node1_pmf(const TandemParams& p, std::size_t m) {
  const TandemNode1Law law = TandemNode1Law::from(p);
  double s = 0.0;
  for (std::size_t j = 0; j <= m; ++j) {
    const std::size_t k = m - j;
    s += poisson_pmf(law.poisson_mean, j) * (law.w_down * negative_binomial_pmf(law.shape, law.p, k) +
                                             law.w_up * negative_binomial_pmf(law.shape - 1.0, law.p, k));
  }
  return s;
}

}  // namespace qnet::analytic
