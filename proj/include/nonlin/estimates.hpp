#pragma once

#include <cstdint>
#include <string>

#include "nonlin/linalg.hpp"

namespace nonlin {

/// How the noise enters y = g(u, v).
enum class NoiseForm {
  noiseless,       // y = f(u)
  additive,        // y = f(u) + G v
  multiplicative,  // y = f(u) + pi(u) gamma(v), E[gamma(v)] = 0
  general,         // y = g(u, v)
};

std::string to_string(NoiseForm form);

/// Finalized moment blocks of one Monte Carlo run (or an analytic stand-in).
///
/// Blocks that do not apply to the model form are zero-sized: sigma_vv for
/// noiseless models, the f blocks for the general form, pi_bar and
/// m_pi_tilde unless multiplicative. For multiplicative models the g blocks
/// are the conditional-expectation forms sigma_gu = sigma_fu and
/// sigma_gg = sigma_ff + m_pi_tilde + pi_bar sigma_gamma_gamma pi_bar^T.
template <typename Scalar>
struct MomentEstimates {
  NoiseForm form = NoiseForm::noiseless;

  Vector<Scalar> mean_u;
  Vector<Scalar> mean_g;
  Vector<Scalar> mean_f;

  Matrix<Scalar> sigma_gg;
  Matrix<Scalar> sigma_gu;
  Matrix<Scalar> sigma_uu;
  Matrix<Scalar> sigma_ff;
  Matrix<Scalar> sigma_fu;
  Matrix<Scalar> sigma_vv;
  Matrix<Scalar> sigma_gamma_gamma;

  Matrix<Scalar> pi_bar;      // n_y x n_gamma
  Matrix<Scalar> m_pi_tilde;  // E[(pi - pi_bar) sigma_gamma_gamma (pi - pi_bar)^T]

  std::int64_t n_samples = 0;
  std::uint64_t seed = 0;

  Index n_u() const { return sigma_uu.rows(); }
  Index n_y() const { return sigma_gg.rows(); }
};

using MomentEstimatesd = MomentEstimates<double>;

template <typename To, typename From>
MomentEstimates<To> cast_estimates(const MomentEstimates<From>& e) {
  MomentEstimates<To> r;
  r.form = e.form;
  r.mean_u = e.mean_u.template cast<To>();
  r.mean_g = e.mean_g.template cast<To>();
  r.mean_f = e.mean_f.template cast<To>();
  r.sigma_gg = e.sigma_gg.template cast<To>();
  r.sigma_gu = e.sigma_gu.template cast<To>();
  r.sigma_uu = e.sigma_uu.template cast<To>();
  r.sigma_ff = e.sigma_ff.template cast<To>();
  r.sigma_fu = e.sigma_fu.template cast<To>();
  r.sigma_vv = e.sigma_vv.template cast<To>();
  r.sigma_gamma_gamma = e.sigma_gamma_gamma.template cast<To>();
  r.pi_bar = e.pi_bar.template cast<To>();
  r.m_pi_tilde = e.m_pi_tilde.template cast<To>();
  r.n_samples = e.n_samples;
  r.seed = e.seed;
  return r;
}

/// sqrt(diag(sigma_gg)): the output scale that brings g to unit variances.
template <typename Scalar>
Vector<Scalar> output_base_scale(const MomentEstimates<Scalar>& est) {
  Vector<Scalar> d = est.sigma_gg.diagonal();
  for (Index i = 0; i < d.size(); ++i)
    if (!(d(i) > Scalar(0)))
      throw DegenerateCovariance("degenerate output dimension " + std::to_string(i));
  return d.cwiseSqrt();
}

}  // namespace nonlin
