#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>

#include "nonlin/errors.hpp"
#include "nonlin/estimates.hpp"
#include "nonlin/linalg.hpp"

namespace nonlin {

/// Best affine approximation g(u, v) ~ A u + b.
template <typename Scalar>
struct LinearFit {
  Matrix<Scalar> a;
  Vector<Scalar> b;
};

enum class WeightKind { identity, legacy_normalized, diag, full, family };

inline std::string to_string(WeightKind kind);

/// Parameters of one member of the unit-free weight family V Y V^T: the
/// diagonal of Y is alphas(i) / lambda(i) in the eigenbasis of the base-unit
/// output covariance; the off-diagonal entries of Y are taken from
/// off_diagonal (its diagonal is ignored, empty means zero).
template <typename Scalar>
struct FamilyParams {
  Vector<Scalar> alphas;
  Matrix<Scalar> off_diagonal;
};

template <typename Scalar>
struct WeightMatrix {
  Matrix<Scalar> w;
  WeightKind kind = WeightKind::identity;
  FamilyParams<Scalar> family;

  /// True for weights normalized so that tr(w sigma_gg) = 1.
  bool unitless() const {
    return kind == WeightKind::diag || kind == WeightKind::full || kind == WeightKind::family;
  }

  std::string label() const {
    if (kind != WeightKind::family) return to_string(kind);
    std::ostringstream os;
    os << "family(";
    for (Index i = 0; i < family.alphas.size(); ++i) {
      char buf[32];
      const auto end = std::to_chars(buf, buf + sizeof buf, static_cast<double>(family.alphas(i))).ptr;
      os << (i ? " " : "") << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    if (family.off_diagonal.size() > 0 && !family.off_diagonal.isZero(0))
      os << "; offdiag";
    os << ")";
    return os.str();
  }
};

enum class MonKind { orig, orig_normalized, weighted };

inline std::string to_string(MonKind kind);

template <typename Scalar>
struct MonResult {
  Scalar value = 0;
  MonKind kind = MonKind::weighted;
  Scalar j_det = 0;  // deterministic part
  Scalar j_sto = 0;  // stochastic part, zero for noiseless and additive models
  Scalar bound = 0;
  std::int64_t n_samples = 0;
  std::uint64_t seed = 0;
  WeightKind weight = WeightKind::identity;
  std::string weight_label;
  Scalar clamped = 0;      // negative eigenvalue mass removed from the residual
  Scalar formula_gap = 0;  // relative gap between the sigma_gg and sigma_ff forms (multiplicative)
};

namespace detail {

template <typename Scalar>
void require_fit_blocks(const MomentEstimates<Scalar>& est) {
  if (est.form == NoiseForm::general) throw NoClosedForm();
  const Index ny = est.sigma_ff.rows(), nu = est.sigma_uu.rows();
  if (est.sigma_ff.cols() != ny || est.sigma_fu.rows() != ny || est.sigma_fu.cols() != nu ||
      est.sigma_uu.cols() != nu || est.sigma_gg.rows() != ny || est.sigma_gg.cols() != ny)
    throw DimensionMismatch("inconsistent moment block shapes");
}

template <typename Scalar>
void require_weight(const MomentEstimates<Scalar>& est, const WeightMatrix<Scalar>& w) {
  if (w.w.rows() != est.n_y() || w.w.cols() != est.n_y())
    throw DimensionMismatch("weight matrix is " + std::to_string(w.w.rows()) + "x" +
                            std::to_string(w.w.cols()) + " but n_y = " + std::to_string(est.n_y()));
}

/// sigma_fu sigma_uu^{-1} sigma_uf
template <typename Scalar>
Matrix<Scalar> explained(const Matrix<Scalar>& sigma_xu, const Matrix<Scalar>& sigma_uu) {
  SpdSolver<Scalar> solver(sigma_uu);
  return sigma_xu * solver.solve(sigma_xu.transpose());
}

template <typename Scalar>
Scalar trace_product(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  return (a.array() * b.transpose().array()).sum();
}

/// Fills value, parts and bound from the (already clamped) residual pieces.
template <typename Scalar>
MonResult<Scalar> assemble(const MomentEstimates<Scalar>& est, const WeightMatrix<Scalar>& w,
                           const Matrix<Scalar>& det_residual, const Matrix<Scalar>& sto_residual) {
  MonResult<Scalar> r;
  r.n_samples = est.n_samples;
  r.seed = est.seed;
  r.weight = w.kind;
  r.weight_label = w.label();
  if (w.kind == WeightKind::legacy_normalized) {
    // M / sqrt(tr sigma_gg), evaluated directly
    const Scalar tr = est.sigma_gg.trace();
    if (!(tr > Scalar(0))) throw DegenerateCovariance("zero output covariance trace");
    r.kind = MonKind::orig_normalized;
    r.j_det = det_residual.trace() / tr;
    r.j_sto = sto_residual.size() ? sto_residual.trace() / tr : Scalar(0);
    r.bound = Scalar(1);
  } else {
    r.kind = w.kind == WeightKind::identity ? MonKind::orig : MonKind::weighted;
    r.j_det = trace_product(w.w, det_residual);
    r.j_sto = sto_residual.size() ? trace_product(w.w, sto_residual) : Scalar(0);
    r.bound = std::sqrt(std::max(Scalar(0), trace_product(w.w, est.sigma_gg)));
  }
  r.value = std::sqrt(std::max(Scalar(0), r.j_det + r.j_sto));
  return r;
}

}  // namespace detail

/// A = sigma_gu sigma_uu^{-1}, b = E[y] - A E[u]; solved through a Cholesky
/// factorization of sigma_uu (eigen pseudo-inverse when that fails).
template <typename Scalar>
LinearFit<Scalar> best_linear_fit(const MomentEstimates<Scalar>& est) {
  if (est.sigma_gu.rows() != est.n_y() || est.sigma_gu.cols() != est.n_u() ||
      est.mean_u.size() != est.n_u() || est.mean_g.size() != est.n_y())
    throw DimensionMismatch("inconsistent moment block shapes");
  SpdSolver<Scalar> solver(est.sigma_uu);
  LinearFit<Scalar> fit;
  fit.a = solver.solve(est.sigma_gu.transpose()).transpose();
  fit.b = est.mean_g - fit.a * est.mean_u;
  return fit;
}

template <typename Scalar>
WeightMatrix<Scalar> weight_identity(Index n_y) {
  if (n_y < 1) throw ValidationError("output dimension must be positive");
  return {Matrix<Scalar>::Identity(n_y, n_y), WeightKind::identity, {}};
}

/// I / sqrt(tr sigma_gg). The MoN evaluates this kind as M / sqrt(tr sigma_gg).
template <typename Scalar>
WeightMatrix<Scalar> weight_legacy(const MomentEstimates<Scalar>& est) {
  const Scalar tr = est.sigma_gg.trace();
  if (!(tr > Scalar(0))) throw DegenerateCovariance("zero output covariance trace");
  const Index n = est.n_y();
  return {Matrix<Scalar>::Identity(n, n) / std::sqrt(tr), WeightKind::legacy_normalized, {}};
}

/// (1/n_y) diag(diag(sigma_gg))^{-1}
template <typename Scalar>
WeightMatrix<Scalar> weight_diag(const MomentEstimates<Scalar>& est) {
  const Vector<Scalar> s = output_base_scale(est);
  const Scalar n = Scalar(est.n_y());
  Matrix<Scalar> w = (s.array().square() * n).inverse().matrix().asDiagonal();
  return {std::move(w), WeightKind::diag, {}};
}

/// (1/n_y) sigma_gg^{-1}
template <typename Scalar>
WeightMatrix<Scalar> weight_full(const MomentEstimates<Scalar>& est) {
  require_square(est.sigma_gg, "sigma_gg");
  const Index n = est.n_y();
  if (n < 1) throw ValidationError("output dimension must be positive");
  SpdSolver<Scalar> solver(est.sigma_gg);
  if (solver.rank() < n) throw DegenerateCovariance("singular output covariance");
  Matrix<Scalar> w = symmetrized(solver.solve(Matrix<Scalar>::Identity(n, n))) / Scalar(n);
  return {std::move(w), WeightKind::full, {}};
}

/// Eigen decomposition of the output covariance in base units (the output
/// correlation matrix), descending, with the sign convention of sorted_eigen.
template <typename Scalar>
SortedEigen<Scalar> base_output_eigen(const MomentEstimates<Scalar>& est) {
  const Vector<Scalar> s = output_base_scale(est);
  const Vector<Scalar> inv = s.cwiseInverse();
  Matrix<Scalar> corr = inv.asDiagonal() * est.sigma_gg * inv.asDiagonal();
  return sorted_eigen<Scalar>(symmetrized(corr));
}

/// Member of the complete family of normalized weights, built in base units
/// and mapped back: W = S_y^{-1} V Y V^T S_y^{-1}.
template <typename Scalar>
WeightMatrix<Scalar> weight_family(const MomentEstimates<Scalar>& est, const FamilyParams<Scalar>& params) {
  const Index n = est.n_y();
  const Vector<Scalar>& alphas = params.alphas;
  if (alphas.size() != n)
    throw ValidationError("family needs " + std::to_string(n) + " alphas, got " + std::to_string(alphas.size()));
  if (!alphas.allFinite() || (alphas.array() <= Scalar(0)).any())
    throw ValidationError("family alphas must be positive");
  if (std::abs(alphas.sum() - Scalar(1)) > Scalar(1e-12)) throw ValidationError("family alphas must sum to 1");
  if (params.off_diagonal.size() > 0) {
    if (params.off_diagonal.rows() != n || params.off_diagonal.cols() != n)
      throw DimensionMismatch("family off-diagonal spec must be n_y x n_y");
    if (!params.off_diagonal.allFinite() ||
        (params.off_diagonal - params.off_diagonal.transpose()).cwiseAbs().maxCoeff() > Scalar(0))
      throw ValidationError("family off-diagonal spec must be symmetric");
  }

  const Vector<Scalar> s = output_base_scale(est);
  const SortedEigen<Scalar> eig = base_output_eigen(est);
  if ((eig.values.array() <= Scalar(0)).any()) throw DegenerateCovariance("singular output covariance");

  Matrix<Scalar> y = params.off_diagonal.size() > 0 ? params.off_diagonal : Matrix<Scalar>::Zero(n, n);
  y.diagonal() = alphas.cwiseQuotient(eig.values);
  if (!is_positive_definite(y)) throw ValidationError("family matrix Y is not positive definite");

  const Vector<Scalar> inv = s.cwiseInverse();
  Matrix<Scalar> w_base = eig.vectors * y * eig.vectors.transpose();
  Matrix<Scalar> w = symmetrized(Matrix<Scalar>(inv.asDiagonal() * w_base * inv.asDiagonal()));
  return {std::move(w), WeightKind::family, params};
}

/// Off-diagonal spec for a family member whose Y has the given correlation
/// structure: Y_ij = corr_ij sqrt(Y_ii Y_jj). Y is positive definite whenever
/// corr is.
template <typename Scalar>
Matrix<Scalar> family_off_diagonal_from_correlation(const MomentEstimates<Scalar>& est,
                                                    const Vector<Scalar>& alphas,
                                                    const Matrix<Scalar>& corr) {
  const SortedEigen<Scalar> eig = base_output_eigen(est);
  const Vector<Scalar> d = alphas.cwiseQuotient(eig.values).cwiseSqrt();
  Matrix<Scalar> off = d.asDiagonal() * symmetrized(corr) * d.asDiagonal();
  off = symmetrized(off);
  off.diagonal().setZero();
  return off;
}

/// sqrt(tr(W sigma_gg)); 1 for the normalized weights and for the legacy
/// normalized measure (which divides by sqrt(tr sigma_gg) itself).
template <typename Scalar>
Scalar mon_upper_bound(const MomentEstimates<Scalar>& est, const WeightMatrix<Scalar>& w) {
  detail::require_weight(est, w);
  if (w.kind == WeightKind::legacy_normalized) return Scalar(1);
  return std::sqrt(std::max(Scalar(0), detail::trace_product(w.w, est.sigma_gg)));
}

/// MoN for noiseless and additive models: sqrt(tr(W (sigma_ff - sigma_fu sigma_uu^{-1} sigma_uf))).
template <typename Scalar>
MonResult<Scalar> mon_additive(const MomentEstimates<Scalar>& est, const WeightMatrix<Scalar>& w) {
  if (est.form != NoiseForm::noiseless && est.form != NoiseForm::additive) {
    if (est.form == NoiseForm::general) throw NoClosedForm();
    throw ValidationError("additive MoN needs a noiseless or additive model, got " + to_string(est.form));
  }
  detail::require_fit_blocks(est);
  detail::require_weight(est, w);
  const Matrix<Scalar> residual = est.sigma_ff - detail::explained(est.sigma_fu, est.sigma_uu);
  ClampedPsd<Scalar> r = clamp_psd(residual);
  MonResult<Scalar> out = detail::assemble(est, w, r.matrix, Matrix<Scalar>());
  out.clamped = r.clamped;
  return out;
}

/// The two algebraically equivalent forms of the squared multiplicative MoN,
/// tr(W(sigma_gg - sigma_gu sigma_uu^{-1} sigma_ug - pi_bar S pi_bar^T)) and
/// tr(W(sigma_ff - sigma_fu sigma_uu^{-1} sigma_uf + m_pi_tilde)), unclamped.
template <typename Scalar>
std::pair<Scalar, Scalar> multiplicative_forms(const MomentEstimates<Scalar>& est, const WeightMatrix<Scalar>& w) {
  if (est.form != NoiseForm::multiplicative)
    throw ValidationError("multiplicative MoN needs a multiplicative model, got " + to_string(est.form));
  detail::require_fit_blocks(est);
  detail::require_weight(est, w);
  const Matrix<Scalar> gg = est.sigma_gg - detail::explained(est.sigma_gu, est.sigma_uu) -
                            est.pi_bar * est.sigma_gamma_gamma * est.pi_bar.transpose();
  const Matrix<Scalar> ff = est.sigma_ff - detail::explained(est.sigma_fu, est.sigma_uu) + est.m_pi_tilde;
  if (w.kind == WeightKind::legacy_normalized) {
    const Scalar tr = est.sigma_gg.trace();
    return {gg.trace() / tr, ff.trace() / tr};
  }
  return {detail::trace_product(w.w, gg), detail::trace_product(w.w, ff)};
}

/// MoN for multiplicative models:
/// sqrt(tr(W (sigma_ff - sigma_fu sigma_uu^{-1} sigma_uf + E[pi~ S_gamma pi~^T]))).
template <typename Scalar>
MonResult<Scalar> mon_multiplicative(const MomentEstimates<Scalar>& est, const WeightMatrix<Scalar>& w) {
  if (est.form == NoiseForm::general) throw NoClosedForm();
  const auto [via_gg, via_ff] = multiplicative_forms(est, w);
  const Matrix<Scalar> residual = est.sigma_ff - detail::explained(est.sigma_fu, est.sigma_uu);
  ClampedPsd<Scalar> r = clamp_psd(residual);
  ClampedPsd<Scalar> m = clamp_psd(est.m_pi_tilde);
  MonResult<Scalar> out = detail::assemble(est, w, r.matrix, m.matrix);
  out.clamped = r.clamped + m.clamped;
  const Scalar scale = std::max(std::abs(via_ff), std::numeric_limits<Scalar>::min());
  out.formula_gap = std::abs(via_gg - via_ff) / scale;
  return out;
}

/// Dispatches on the model form; the general form has no closed form.
template <typename Scalar>
MonResult<Scalar> mon(const MomentEstimates<Scalar>& est, const WeightMatrix<Scalar>& w) {
  switch (est.form) {
    case NoiseForm::noiseless:
    case NoiseForm::additive: return mon_additive(est, w);
    case NoiseForm::multiplicative: return mon_multiplicative(est, w);
    case NoiseForm::general: break;
  }
  throw NoClosedForm();
}

inline std::string to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::identity: return "identity";
    case WeightKind::legacy_normalized: return "legacy_normalized";
    case WeightKind::diag: return "diag";
    case WeightKind::full: return "full";
    case WeightKind::family: return "family";
  }
  return "unknown";
}

inline std::string to_string(MonKind kind) {
  switch (kind) {
    case MonKind::orig: return "orig";
    case MonKind::orig_normalized: return "orig_normalized";
    case MonKind::weighted: return "weighted";
  }
  return "unknown";
}

}  // namespace nonlin
