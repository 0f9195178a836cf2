#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace nonlin {

/// Multivariate normal N(mean, cov) together with the square-root factor used
/// to draw from it. Samples are mean + factor * z with z ~ N(0, I).
///
/// The factor is the Cholesky factor of cov, computed with a jitter fallback
/// for near-singular covariances and an eigenvalue-clamped pseudo-factor as
/// the last resort. Affine maps carry the factor along (see affine_inverse),
/// so a transformed prior fed the same z produces exactly the transformed
/// samples.
class GaussianPrior {
 public:
  GaussianPrior() = default;
  GaussianPrior(Eigen::VectorXd mean, Eigen::MatrixXd cov);

  static GaussianPrior standard(Eigen::Index dim);

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  const Eigen::MatrixXd& factor() const { return factor_; }
  Eigen::Index dim() const { return mean_.size(); }

  /// Distribution of S^{-1} (x - offset) for x drawn from this prior.
  GaussianPrior affine_inverse(const Eigen::MatrixXd& scale, const Eigen::VectorXd& offset) const;

  /// Columns of z are standard normal draws; returns the matching samples.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& z) const;

 private:
  GaussianPrior(Eigen::VectorXd mean, Eigen::MatrixXd cov, Eigen::MatrixXd factor);

  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd factor_;
};

/// Square-root factor of a symmetric PSD matrix: Cholesky, then Cholesky with
/// jitter 1e-12 * trace/dim * I growing by decades up to 1e-9, then the
/// eigen pseudo-factor V sqrt(max(lambda, 0)).
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov);

inline constexpr Eigen::Index kDefaultChunkSize = 1 << 15;

/// Independent random stream for one chunk of a seeded run.
std::mt19937_64 chunk_engine(std::uint64_t seed, std::uint64_t chunk);

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& engine);

/// n draws (as columns) from prior. Chunk c of size chunk_size is drawn from
/// chunk_engine(seed, c), so the result depends only on (seed, n, chunk_size).
Eigen::MatrixXd sample_gaussian(const GaussianPrior& prior, Eigen::Index n, std::uint64_t seed,
                                Eigen::Index chunk_size = kDefaultChunkSize);

}  // namespace nonlin
