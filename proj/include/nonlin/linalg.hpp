#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "nonlin/errors.hpp"

namespace nonlin {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

template <typename Derived>
Matrix<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  Eigen::LLT<Matrix<typename Derived::Scalar>> llt(symmetrized(m));
  return llt.info() == Eigen::Success;
}

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& m, const std::string& name) {
  if (m.rows() != m.cols())
    throw DimensionMismatch(name + " must be square, got " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
}

/// Solves against a symmetric PSD matrix. Cholesky first; if that fails the
/// eigen pseudo-inverse with relative cutoff 1e-12 * lambda_max is used.
template <typename Scalar>
class SpdSolver {
 public:
  static constexpr double kRelativeCutoff = 1e-12;

  SpdSolver() = default;
  explicit SpdSolver(const Matrix<Scalar>& a) { compute(a); }

  SpdSolver& compute(const Matrix<Scalar>& a) {
    require_square(a, "covariance");
    if (!a.allFinite()) throw DegenerateCovariance("degenerate input covariance: non-finite entries");
    Matrix<Scalar> sym = symmetrized(a);
    llt_.compute(sym);
    pseudo_ = llt_.info() != Eigen::Success;
    if (pseudo_) {
      Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym);
      if (es.info() != Eigen::Success)
        throw DegenerateCovariance("degenerate input covariance: eigen solver failed");
      const Scalar lmax = es.eigenvalues().maxCoeff();
      if (!(lmax > Scalar(0)))
        throw DegenerateCovariance("degenerate input covariance: no positive eigenvalue");
      const Scalar cutoff = Scalar(kRelativeCutoff) * lmax;
      Vector<Scalar> inv = es.eigenvalues().unaryExpr(
          [cutoff](Scalar l) { return l > cutoff ? Scalar(1) / l : Scalar(0); });
      pinv_ = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
      rank_ = (es.eigenvalues().array() > cutoff).count();
    } else {
      rank_ = a.rows();
    }
    return *this;
  }

  template <typename Rhs>
  Matrix<Scalar> solve(const Eigen::MatrixBase<Rhs>& b) const {
    if (pseudo_) return pinv_ * b;
    return llt_.solve(b);
  }

  bool used_pseudo_inverse() const { return pseudo_; }
  Index rank() const { return rank_; }

 private:
  Eigen::LLT<Matrix<Scalar>> llt_;
  Matrix<Scalar> pinv_;
  bool pseudo_ = false;
  Index rank_ = 0;
};

/// Symmetric part of m with negative eigenvalues set to zero.
template <typename Scalar>
struct ClampedPsd {
  Matrix<Scalar> matrix;
  Scalar clamped = 0;  // sum of |negative eigenvalues| removed
};

template <typename Scalar>
ClampedPsd<Scalar> clamp_psd(const Matrix<Scalar>& m) {
  Matrix<Scalar> sym = symmetrized(m);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym);
  if (es.info() != Eigen::Success) throw NumericalError("eigen solver failed while clamping");
  const Vector<Scalar>& lambda = es.eigenvalues();
  if ((lambda.array() >= Scalar(0)).all()) return {std::move(sym), Scalar(0)};
  Scalar removed = -lambda.cwiseMin(Scalar(0)).sum();
  Matrix<Scalar> out =
      es.eigenvectors() * lambda.cwiseMax(Scalar(0)).asDiagonal() * es.eigenvectors().transpose();
  return {symmetrized(out), removed};
}

/// Eigen decomposition of a symmetric matrix with eigenvalues in descending
/// order. Each eigenvector is flipped so its largest-magnitude component is
/// positive (first such component on ties).
template <typename Scalar>
struct SortedEigen {
  Vector<Scalar> values;
  Matrix<Scalar> vectors;
};

template <typename Scalar>
SortedEigen<Scalar> sorted_eigen(const Matrix<Scalar>& m) {
  require_square(m, "matrix");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(symmetrized(m));
  if (es.info() != Eigen::Success) throw NumericalError("eigen solver failed");
  const Index n = m.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return es.eigenvalues()(a) > es.eigenvalues()(b);
  });
  SortedEigen<Scalar> out{Vector<Scalar>(n), Matrix<Scalar>(n, n)};
  for (Index k = 0; k < n; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = es.eigenvalues()(src);
    Vector<Scalar> v = es.eigenvectors().col(src);
    // largest-magnitude component positive; near ties go to the lowest index
    const Scalar top = v.cwiseAbs().maxCoeff();
    Index pivot = 0;
    while (std::abs(v(pivot)) < top * (Scalar(1) - Scalar(1e-6))) ++pivot;
    if (v(pivot) < Scalar(0)) v = -v;
    out.vectors.col(k) = v;
  }
  return out;
}

}  // namespace nonlin
