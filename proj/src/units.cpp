#include "nonlin/units.hpp"

#include "nonlin/errors.hpp"

namespace nonlin {

namespace {

void check_scale(const Eigen::MatrixXd& s, Eigen::Index n, const char* name) {
  if (s.rows() != n || s.cols() != n)
    throw DimensionMismatch(std::string(name) + " must be " + std::to_string(n) + "x" +
                            std::to_string(n));
  if (n > 0 && !is_positive_definite(s))
    throw ValidationError(std::string(name) + " is not positive definite");
}

Eigen::MatrixXd inverse_of(const Eigen::MatrixXd& s) {
  if (s.size() == 0) return s;
  return s.partialPivLu().inverse();
}

Eigen::MatrixXd apply_to_pi(const Eigen::MatrixXd& s_y_inv, const Eigen::MatrixXd& pi,
                            Eigen::Index n_y, Eigen::Index n_gamma) {
  Eigen::MatrixXd out(pi.rows(), pi.cols());
  for (Eigen::Index j = 0; j < pi.cols(); ++j) {
    Eigen::Map<const Eigen::MatrixXd> p(pi.col(j).data(), n_y, n_gamma);
    Eigen::Map<Eigen::MatrixXd> q(out.col(j).data(), n_y, n_gamma);
    q.noalias() = s_y_inv * p;
  }
  return out;
}

}  // namespace

UnitChange UnitChange::identity(Eigen::Index n_u, Eigen::Index n_v, Eigen::Index n_y) {
  return {Eigen::MatrixXd::Identity(n_u, n_u), Eigen::VectorXd::Zero(n_u),
          Eigen::MatrixXd::Identity(n_y, n_y), Eigen::VectorXd::Zero(n_y),
          Eigen::MatrixXd::Identity(n_v, n_v)};
}

UnitChange UnitChange::identity_for(const StochasticModel& model) {
  return identity(model.n_u(), model.n_v(), model.n_y());
}

UnitChange UnitChange::output_rescale(Eigen::Index n_u, Eigen::Index n_v,
                                      const Eigen::VectorXd& factors) {
  if ((factors.array() <= 0).any() || !factors.allFinite())
    throw ValidationError("output rescale factors must be positive");
  UnitChange c = identity(n_u, n_v, factors.size());
  c.s_y = factors.cwiseInverse().asDiagonal();
  return c;
}

UnitChange UnitChange::inverse() const {
  UnitChange c;
  c.s_u = inverse_of(s_u);
  c.o_u = -(c.s_u * o_u);
  c.s_y = inverse_of(s_y);
  c.o_y = -(c.s_y * o_y);
  c.s_v = inverse_of(s_v);
  return c;
}

void UnitChange::validate() const {
  check_scale(s_u, s_u.rows(), "S_u");
  check_scale(s_y, s_y.rows(), "S_y");
  check_scale(s_v, s_v.rows(), "S_v");
  if (o_u.size() != s_u.rows()) throw DimensionMismatch("o_u does not match S_u");
  if (o_y.size() != s_y.rows()) throw DimensionMismatch("o_y does not match S_y");
  if (!o_u.allFinite() || !o_y.allFinite()) throw ValidationError("offsets must be finite");
}

UnitChange compose(const UnitChange& first, const UnitChange& second) {
  UnitChange c;
  c.s_u = first.s_u * second.s_u;
  c.o_u = first.s_u * second.o_u + first.o_u;
  c.s_y = first.s_y * second.s_y;
  c.o_y = first.s_y * second.o_y + first.o_y;
  c.s_v = first.s_v * second.s_v;
  return c;
}

StochasticModel apply_unit_change(const StochasticModel& model, const UnitChange& change) {
  change.validate();
  if (change.s_u.rows() != model.n_u() || change.s_y.rows() != model.n_y() ||
      change.s_v.rows() != model.n_v())
    throw DimensionMismatch("unit change does not match model dimensions");

  const Eigen::MatrixXd s_u = change.s_u;
  const Eigen::VectorXd o_u = change.o_u;
  const Eigen::MatrixXd s_v = change.s_v;
  const Eigen::MatrixXd s_y_inv = inverse_of(change.s_y);
  const Eigen::VectorXd o_y = change.o_y;

  auto to_old_u = [s_u, o_u](const Eigen::MatrixXd& u) -> Eigen::MatrixXd {
    return (s_u * u).colwise() + o_u;
  };

  ModelBuilder b(model);
  b.prior_u(model.prior_u().affine_inverse(change.s_u, change.o_u));
  b.prior_v(model.prior_v().affine_inverse(change.s_v, Eigen::VectorXd::Zero(model.n_v())));

  if (model.form() == NoiseForm::general) {
    JointBatchMap g = model.g_map();
    b.g([g, to_old_u, s_v, s_y_inv, o_y](const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
      Eigen::MatrixXd out = s_y_inv * (g(to_old_u(u), s_v * v).colwise() - o_y);
      return out;
    });
    return b.build();
  }

  BatchMap f = model.f_map();
  b.f([f, to_old_u, s_y_inv, o_y](const Eigen::MatrixXd& u) {
    Eigen::MatrixXd out = s_y_inv * (f(to_old_u(u)).colwise() - o_y);
    return out;
  });

  if (model.form() == NoiseForm::additive) {
    b.noise_gain(s_y_inv * model.noise_gain() * s_v);
  } else if (model.form() == NoiseForm::multiplicative) {
    BatchMap pi = model.pi_map();
    const Eigen::Index n_y = model.n_y();
    const Eigen::Index n_gamma = model.n_gamma();
    b.pi([pi, to_old_u, s_y_inv, n_y, n_gamma](const Eigen::MatrixXd& u) {
      return apply_to_pi(s_y_inv, pi(to_old_u(u)), n_y, n_gamma);
    });
    BatchMap gamma = model.gamma_map();
    b.gamma([gamma, s_v](const Eigen::MatrixXd& v) -> Eigen::MatrixXd { return gamma(s_v * v); });
  }
  return b.build();
}

UnitChange base_unit_change(const MomentEstimatesd& est) {
  UnitChange c;
  c.s_y = output_base_scale(est).asDiagonal();
  c.o_y = est.mean_g;

  Eigen::VectorXd du = est.sigma_uu.diagonal();
  if ((du.array() <= 0).any()) throw DegenerateCovariance("degenerate input dimension");
  c.s_u = du.cwiseSqrt().asDiagonal();
  c.o_u = est.mean_u;

  Eigen::VectorXd dv = est.sigma_vv.diagonal();
  if ((dv.array() <= 0).any()) throw DegenerateCovariance("degenerate noise dimension");
  c.s_v = dv.cwiseSqrt().asDiagonal();
  return c;
}

MomentEstimatesd transform_estimates(const MomentEstimatesd& est, const UnitChange& change) {
  change.validate();
  if (change.s_u.rows() != est.n_u() || change.s_y.rows() != est.n_y() ||
      change.s_v.rows() != est.sigma_vv.rows())
    throw DimensionMismatch("unit change does not match estimate dimensions");
  const Eigen::MatrixXd su = inverse_of(change.s_u);
  const Eigen::MatrixXd sy = inverse_of(change.s_y);
  const Eigen::MatrixXd sv = inverse_of(change.s_v);

  MomentEstimatesd out = est;
  out.mean_u = su * (est.mean_u - change.o_u);
  out.mean_g = sy * (est.mean_g - change.o_y);
  out.sigma_uu = symmetrized(su * est.sigma_uu * su.transpose());
  out.sigma_gg = symmetrized(sy * est.sigma_gg * sy.transpose());
  out.sigma_gu = sy * est.sigma_gu * su.transpose();
  out.sigma_vv = symmetrized(sv * est.sigma_vv * sv.transpose());
  if (est.form != NoiseForm::general) {
    out.mean_f = sy * (est.mean_f - change.o_y);
    out.sigma_ff = symmetrized(sy * est.sigma_ff * sy.transpose());
    out.sigma_fu = sy * est.sigma_fu * su.transpose();
  }
  if (est.form == NoiseForm::multiplicative) {
    out.pi_bar = sy * est.pi_bar;
    out.m_pi_tilde = symmetrized(sy * est.m_pi_tilde * sy.transpose());
  }
  return out;
}

}  // namespace nonlin
