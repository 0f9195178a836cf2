#include "nonlin/prior.hpp"

#include <cmath>

#include "nonlin/errors.hpp"
#include "nonlin/linalg.hpp"

namespace nonlin {

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  require_square(cov, "covariance");
  const Eigen::Index n = cov.rows();
  if (n == 0) return Eigen::MatrixXd(0, 0);
  if (!cov.allFinite()) throw NotPositiveSemiDefinite("covariance has non-finite entries");

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  const double scale = std::abs(cov.trace()) / static_cast<double>(n);
  if (scale > 0) {
    for (double jitter = 1e-12; jitter <= 1e-9 * 1.0001; jitter *= 10) {
      Eigen::MatrixXd shifted = cov;
      shifted.diagonal().array() += jitter * scale;
      llt.compute(shifted);
      if (llt.info() == Eigen::Success) return llt.matrixL();
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NotPositiveSemiDefinite("eigen solver failed");
  const Eigen::VectorXd& lambda = es.eigenvalues();
  const double tol = 1e-10 * std::max(scale, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -tol)
    throw NotPositiveSemiDefinite("covariance has eigenvalue " + std::to_string(lambda.minCoeff()));
  return es.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

GaussianPrior::GaussianPrior(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  require_square(cov_, "covariance");
  if (cov_.rows() != mean_.size())
    throw DimensionMismatch("prior mean has dimension " + std::to_string(mean_.size()) +
                            " but covariance is " + std::to_string(cov_.rows()) + "x" +
                            std::to_string(cov_.cols()));
  if (!mean_.allFinite()) throw ValidationError("prior mean has non-finite entries");
  if (cov_.size() > 0) {
    const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, cov_.cwiseAbs().maxCoeff()))
      throw NotPositiveSemiDefinite("covariance is not symmetric");
  }
  cov_ = symmetrized(cov_);
  factor_ = psd_factor(cov_);
}

GaussianPrior::GaussianPrior(Eigen::VectorXd mean, Eigen::MatrixXd cov, Eigen::MatrixXd factor)
    : mean_(std::move(mean)), cov_(std::move(cov)), factor_(std::move(factor)) {}

GaussianPrior GaussianPrior::standard(Eigen::Index dim) {
  return GaussianPrior(Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim));
}

GaussianPrior GaussianPrior::affine_inverse(const Eigen::MatrixXd& scale,
                                            const Eigen::VectorXd& offset) const {
  if (scale.rows() != dim() || scale.cols() != dim() || offset.size() != dim())
    throw DimensionMismatch("affine map does not match prior dimension " + std::to_string(dim()));
  if (dim() == 0) return *this;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(scale);
  Eigen::VectorXd mean = lu.solve(mean_ - offset);
  Eigen::MatrixXd factor = lu.solve(factor_);
  Eigen::MatrixXd cov = lu.solve(lu.solve(cov_).transpose());
  return GaussianPrior(std::move(mean), symmetrized(cov), std::move(factor));
}

Eigen::MatrixXd GaussianPrior::transform(const Eigen::MatrixXd& z) const {
  if (z.rows() != dim()) throw DimensionMismatch("standard normal block has wrong row count");
  return (factor_ * z).colwise() + mean_;
}

std::mt19937_64 chunk_engine(std::uint64_t seed, std::uint64_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& engine) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd z(rows, cols);
  // column-major fill: one sample's coordinates are consecutive draws
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = normal(engine);
  return z;
}

Eigen::MatrixXd sample_gaussian(const GaussianPrior& prior, Eigen::Index n, std::uint64_t seed,
                                Eigen::Index chunk_size) {
  if (n < 1) throw ValidationError("sample count must be at least 1");
  if (chunk_size < 1) throw ValidationError("chunk size must be at least 1");
  Eigen::MatrixXd out(prior.dim(), n);
  for (Eigen::Index start = 0, c = 0; start < n; start += chunk_size, ++c) {
    const Eigen::Index len = std::min(chunk_size, n - start);
    auto engine = chunk_engine(seed, static_cast<std::uint64_t>(c));
    out.middleCols(start, len) = prior.transform(standard_normal(prior.dim(), len, engine));
  }
  return out;
}

}  // namespace nonlin
