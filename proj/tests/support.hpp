#pragma once

// Test-only oracles and generators. Nothing here calls into the accumulator;
// the covariance oracle works on explicitly stored samples.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "nonlin/estimates.hpp"
#include "nonlin/model.hpp"
#include "nonlin/mon.hpp"
#include "nonlin/units.hpp"

namespace nonlin::testing {

/// Two-pass unbiased covariance between the rows of a and b (columns are samples).
inline Eigen::MatrixXd two_pass_cov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double n = static_cast<double>(a.cols());
  Eigen::MatrixXd ca = a.colwise() - a.rowwise().mean();
  Eigen::MatrixXd cb = b.colwise() - b.rowwise().mean();
  return ca * cb.transpose() / (n - 1.0);
}

/// Two-pass estimate of E[(pi - pi_bar) S (pi - pi_bar)^T] with S the
/// two-pass covariance of the gamma samples.
inline Eigen::MatrixXd two_pass_m_pi_tilde(const Eigen::MatrixXd& pi, const Eigen::MatrixXd& gamma,
                                           Eigen::Index n_y) {
  const Eigen::Index n_gamma = gamma.rows();
  const Eigen::MatrixXd s = two_pass_cov(gamma, gamma);
  const Eigen::VectorXd mean = pi.rowwise().mean();
  Eigen::Map<const Eigen::MatrixXd> pbar(mean.data(), n_y, n_gamma);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n_y, n_y);
  for (Eigen::Index j = 0; j < pi.cols(); ++j) {
    Eigen::Map<const Eigen::MatrixXd> p(pi.col(j).data(), n_y, n_gamma);
    Eigen::MatrixXd d = p - pbar;
    acc += d * s * d.transpose();
  }
  return acc / static_cast<double>(pi.cols() - 1);
}

inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.size() == 0 && b.size() == 0) return 0.0;
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Raw moments E[u^k], k = 0..kmax, of N(mu, sigma2): m_k = mu m_{k-1} + (k-1) sigma2 m_{k-2}.
inline std::vector<double> gaussian_raw_moments(double mu, double sigma2, int kmax) {
  std::vector<double> m(static_cast<std::size_t>(kmax) + 1, 0.0);
  m[0] = 1.0;
  if (kmax >= 1) m[1] = mu;
  for (int k = 2; k <= kmax; ++k)
    m[static_cast<std::size_t>(k)] = mu * m[static_cast<std::size_t>(k - 1)] +
                                     (k - 1) * sigma2 * m[static_cast<std::size_t>(k - 2)];
  return m;
}

/// Exact moments of the noiseless scalar model y = u^2, u ~ N(mu, sigma2).
inline MomentEstimatesd square_model_moments(double mu, double sigma2) {
  const auto m = gaussian_raw_moments(mu, sigma2, 4);
  MomentEstimatesd e;
  e.form = NoiseForm::noiseless;
  e.mean_u = Eigen::VectorXd::Constant(1, mu);
  e.mean_f = Eigen::VectorXd::Constant(1, m[2]);
  e.mean_g = e.mean_f;
  e.sigma_uu = Eigen::MatrixXd::Constant(1, 1, sigma2);
  e.sigma_ff = Eigen::MatrixXd::Constant(1, 1, m[4] - m[2] * m[2]);
  e.sigma_fu = Eigen::MatrixXd::Constant(1, 1, m[3] - m[2] * m[1]);
  e.sigma_gg = e.sigma_ff;
  e.sigma_gu = e.sigma_fu;
  e.sigma_vv = Eigen::MatrixXd(0, 0);
  e.n_samples = 0;
  return e;
}

inline Eigen::MatrixXd random_spd(Eigen::Index n, double max_condition, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) lambda(i) = std::pow(max_condition, unit(rng));
  if (n > 0) lambda(0) = 1.0;
  Eigen::MatrixXd s = q * lambda.asDiagonal() * q.transpose();
  return (s + s.transpose()) / 2.0;
}

inline Eigen::MatrixXd random_positive_diagonal(Eigen::Index n, double max_condition, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = std::pow(max_condition, unit(rng) - 0.5);
  return d.asDiagonal();
}

inline Eigen::VectorXd random_offset(Eigen::Index n, double max_abs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-max_abs, max_abs);
  Eigen::VectorXd o(n);
  for (Eigen::Index i = 0; i < n; ++i) o(i) = u(rng);
  return o;
}

/// Random affine unit change: full SPD input and noise scales, positive
/// diagonal output scale (a per-component change of output units).
inline UnitChange random_unit_change(const StochasticModel& m, double max_condition, double max_offset,
                                     std::mt19937_64& rng) {
  UnitChange c;
  c.s_u = random_spd(m.n_u(), max_condition, rng);
  c.o_u = random_offset(m.n_u(), max_offset, rng);
  c.s_y = random_positive_diagonal(m.n_y(), max_condition, rng);
  c.o_y = random_offset(m.n_y(), max_offset, rng);
  c.s_v = random_spd(m.n_v(), max_condition, rng);
  return c;
}

/// Random family member: Dirichlet(1) alphas and a random correlation
/// structure for Y (zero off-diagonals for n_y = 1).
inline FamilyParams<double> random_family(const MomentEstimatesd& est, std::mt19937_64& rng) {
  const Eigen::Index n = est.n_y();
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd alphas(n);
  for (Eigen::Index i = 0; i < n; ++i) alphas(i) = expo(rng) + 1e-3;
  alphas /= alphas.sum();
  alphas(n - 1) = 1.0 - alphas.head(n - 1).sum();
  FamilyParams<double> p;
  p.alphas = alphas;
  if (n > 1) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd b(n, n);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = normal(rng);
    Eigen::MatrixXd c = b * b.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd d = c.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd corr = d.asDiagonal() * c * d.asDiagonal();
    p.off_diagonal = family_off_diagonal_from_correlation(est, alphas, corr);
  }
  return p;
}

}  // namespace nonlin::testing
