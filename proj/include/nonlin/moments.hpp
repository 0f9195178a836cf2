#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "nonlin/errors.hpp"
#include "nonlin/estimates.hpp"
#include "nonlin/linalg.hpp"
#include "nonlin/model.hpp"
#include "nonlin/prior.hpp"

namespace nonlin {

/// Where each evaluated quantity sits in the stacked per-sample vector
/// [u; v; f; g; vec(pi); gamma] that the accumulator tracks. Slots a model
/// form does not need have length zero: noiseless models store f only
/// (g = f), multiplicative models store no g (it is reassembled at
/// finalization), the general form stores no f.
struct MomentLayout {
  NoiseForm form = NoiseForm::noiseless;
  Index n_u = 0, n_v = 0, n_y = 0, n_gamma = 0;
  Index u = 0, v = 0, f = 0, g = 0, pi = 0, gamma = 0;
  Index len_f = 0, len_g = 0, len_pi = 0;
  Index total = 0;

  static MomentLayout for_model(const StochasticModel& model) {
    MomentLayout l;
    l.form = model.form();
    l.n_u = model.n_u();
    l.n_v = model.n_v();
    l.n_y = model.n_y();
    l.n_gamma = model.form() == NoiseForm::multiplicative ? model.n_gamma() : 0;
    l.len_f = l.form == NoiseForm::general ? 0 : l.n_y;
    l.len_g = (l.form == NoiseForm::additive || l.form == NoiseForm::general) ? l.n_y : 0;
    l.len_pi = l.n_y * l.n_gamma;
    l.u = 0;
    l.v = l.u + l.n_u;
    l.f = l.v + l.n_v;
    l.g = l.f + l.len_f;
    l.pi = l.g + l.len_g;
    l.gamma = l.pi + l.len_pi;
    l.total = l.gamma + l.n_gamma;
    return l;
  }

  bool operator==(const MomentLayout& o) const {
    return form == o.form && n_u == o.n_u && n_v == o.n_v && n_y == o.n_y && n_gamma == o.n_gamma;
  }
};

/// Inputs drawn for one batch; columns are samples.
struct SampleBatch {
  Eigen::MatrixXd u;
  Eigen::MatrixXd v;
  std::int64_t first_index = 0;  // global index of column 0
};

/// Draws len joint (u, v) samples. Each sample consumes n_u then n_v
/// standard normals from the engine.
inline SampleBatch draw_batch(const StochasticModel& model, Index len, std::mt19937_64& engine,
                              std::int64_t first_index = 0) {
  Eigen::MatrixXd z = standard_normal(model.n_u() + model.n_v(), len, engine);
  SampleBatch b;
  b.u = model.prior_u().transform(z.topRows(model.n_u()));
  b.v = model.prior_v().transform(z.bottomRows(model.n_v()));
  b.first_index = first_index;
  return b;
}

/// Streaming mean and co-moment of the stacked sample vector. Each batch is
/// reduced exactly (two-pass over the batch) and folded in with the pairwise
/// update of Chan, Golub and LeVeque, which is also the merge rule.
template <typename Scalar = double>
class MomentAccumulator {
 public:
  MomentAccumulator() = default;
  explicit MomentAccumulator(const MomentLayout& layout)
      : layout_(layout),
        mean_(Vector<Scalar>::Zero(layout.total)),
        comoment_(Matrix<Scalar>::Zero(layout.total, layout.total)) {}
  explicit MomentAccumulator(const StochasticModel& model)
      : MomentAccumulator(MomentLayout::for_model(model)) {}

  const MomentLayout& layout() const { return layout_; }
  std::int64_t count() const { return n_; }
  const Vector<Scalar>& mean() const { return mean_; }
  const Matrix<Scalar>& comoment() const { return comoment_; }

  /// Evaluates the model on the batch and folds the results in.
  MomentAccumulator& accumulate(const StochasticModel& model, const SampleBatch& batch) {
    if (!(MomentLayout::for_model(model) == layout_))
      throw DimensionMismatch("batch model does not match accumulator layout");
    add_stacked(stack(model, batch), batch.first_index);
    return *this;
  }

  /// Folds in pre-stacked columns (layout().total rows).
  MomentAccumulator& add_stacked(const Eigen::MatrixXd& z, std::int64_t first_index = 0) {
    if (z.rows() != layout_.total) throw DimensionMismatch("stacked batch has wrong row count");
    if (z.cols() == 0) return *this;
    for (Index j = 0; j < z.cols(); ++j)
      if (!z.col(j).allFinite()) throw NonFiniteOutput(static_cast<std::size_t>(first_index + j));
    // shift by the first sample so constant components stay exactly constant
    Matrix<Scalar> zs = z.template cast<Scalar>();
    const Vector<Scalar> pivot = zs.col(0);
    zs.colwise() -= pivot;
    MomentAccumulator batch(layout_);
    batch.n_ = z.cols();
    const Vector<Scalar> shifted_mean = zs.rowwise().mean();
    zs.colwise() -= shifted_mean;
    batch.comoment_.noalias() = zs * zs.transpose();
    batch.mean_ = pivot + shifted_mean;
    return merge(batch);
  }

  /// In-place pairwise merge.
  MomentAccumulator& merge(const MomentAccumulator& other) {
    if (!(other.layout_ == layout_)) throw DimensionMismatch("cannot merge accumulators of different shape");
    if (other.n_ == 0) return *this;
    if (n_ == 0) {
      *this = other;
      return *this;
    }
    const Scalar na = Scalar(n_), nb = Scalar(other.n_), n = na + nb;
    Vector<Scalar> delta = other.mean_ - mean_;
    mean_ += delta * (nb / n);
    comoment_ += other.comoment_;
    comoment_.noalias() += (delta * delta.transpose()) * (na * nb / n);
    n_ += other.n_;
    return *this;
  }

  /// Unbiased covariance blocks. Requires at least two samples.
  MomentEstimates<Scalar> finalize(std::uint64_t seed = 0) const {
    if (n_ < 2) throw InsufficientSamples("insufficient samples: need at least 2, have " + std::to_string(n_));
    const MomentLayout& l = layout_;
    const Matrix<Scalar> cov = symmetrized(comoment_) / Scalar(n_ - 1);
    auto block = [&](Index r, Index nr, Index c, Index nc) { return Matrix<Scalar>(cov.block(r, c, nr, nc)); };

    MomentEstimates<Scalar> e;
    e.form = l.form;
    e.n_samples = n_;
    e.seed = seed;
    e.mean_u = mean_.segment(l.u, l.n_u);
    e.sigma_uu = block(l.u, l.n_u, l.u, l.n_u);
    e.sigma_vv = block(l.v, l.n_v, l.v, l.n_v);
    if (l.len_f > 0) {
      e.mean_f = mean_.segment(l.f, l.len_f);
      e.sigma_ff = block(l.f, l.len_f, l.f, l.len_f);
      e.sigma_fu = block(l.f, l.len_f, l.u, l.n_u);
    }
    switch (l.form) {
      case NoiseForm::noiseless:
        e.mean_g = e.mean_f;
        e.sigma_gg = e.sigma_ff;
        e.sigma_gu = e.sigma_fu;
        break;
      case NoiseForm::additive:
      case NoiseForm::general:
        e.mean_g = mean_.segment(l.g, l.len_g);
        e.sigma_gg = block(l.g, l.len_g, l.g, l.len_g);
        e.sigma_gu = block(l.g, l.len_g, l.u, l.n_u);
        break;
      case NoiseForm::multiplicative: {
        e.sigma_gamma_gamma = block(l.gamma, l.n_gamma, l.gamma, l.n_gamma);
        e.pi_bar = Eigen::Map<const Matrix<Scalar>>(mean_.data() + l.pi, l.n_y, l.n_gamma);
        const Matrix<Scalar> cov_pi = block(l.pi, l.len_pi, l.pi, l.len_pi);
        // E[pi~ S pi~^T]_ij = sum_ab S_ab cov(pi_ia, pi_jb); vec index of pi_ia is a*n_y + i
        Matrix<Scalar> m = Matrix<Scalar>::Zero(l.n_y, l.n_y);
        for (Index a = 0; a < l.n_gamma; ++a)
          for (Index b = 0; b < l.n_gamma; ++b)
            m += e.sigma_gamma_gamma(a, b) * cov_pi.block(a * l.n_y, b * l.n_y, l.n_y, l.n_y);
        e.m_pi_tilde = symmetrized(m);
        e.mean_g = e.mean_f;
        e.sigma_gu = e.sigma_fu;
        e.sigma_gg = symmetrized(Matrix<Scalar>(
            e.sigma_ff + e.m_pi_tilde + e.pi_bar * e.sigma_gamma_gamma * e.pi_bar.transpose()));
        break;
      }
    }
    return e;
  }

  /// Stacked per-sample vectors for a batch, in layout order.
  Eigen::MatrixXd stack(const StochasticModel& model, const SampleBatch& batch) const {
    const MomentLayout& l = layout_;
    ModelEvaluation ev = model.evaluate(batch.u, batch.v);
    Eigen::MatrixXd z(l.total, batch.u.cols());
    z.middleRows(l.u, l.n_u) = batch.u;
    z.middleRows(l.v, l.n_v) = batch.v;
    if (l.len_f > 0) z.middleRows(l.f, l.len_f) = ev.f;
    if (l.len_g > 0) z.middleRows(l.g, l.len_g) = ev.g;
    if (l.len_pi > 0) z.middleRows(l.pi, l.len_pi) = ev.pi;
    if (l.n_gamma > 0) z.middleRows(l.gamma, l.n_gamma) = ev.gamma;
    return z;
  }

 private:
  MomentLayout layout_;
  std::int64_t n_ = 0;
  Vector<Scalar> mean_;
  Matrix<Scalar> comoment_;
};

template <typename Scalar>
MomentAccumulator<Scalar> merge(MomentAccumulator<Scalar> a, const MomentAccumulator<Scalar>& b) {
  return a.merge(b);
}

template <typename Scalar>
MomentAccumulator<Scalar> accumulate(const StochasticModel& model, const SampleBatch& batch,
                                     MomentAccumulator<Scalar> acc) {
  return acc.accumulate(model, batch);
}

template <typename Scalar>
MomentEstimates<Scalar> finalize(const MomentAccumulator<Scalar>& acc, std::uint64_t seed = 0) {
  return acc.finalize(seed);
}

struct MonteCarloOptions {
  std::int64_t n_samples = 1'000'000;
  std::uint64_t seed = 1;
  Index chunk_size = kDefaultChunkSize;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Merges in a fixed balanced binary tree over the index order, so the
/// result does not depend on how the parts were produced.
template <typename Scalar>
MomentAccumulator<Scalar> merge_tree(const std::vector<MomentAccumulator<Scalar>>& parts, std::size_t lo,
                                     std::size_t hi) {
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return merge(merge_tree(parts, lo, mid), merge_tree(parts, mid, hi));
}

template <typename Scalar>
MomentAccumulator<Scalar> merge_tree(const std::vector<MomentAccumulator<Scalar>>& parts) {
  if (parts.empty()) throw InsufficientSamples("insufficient samples: nothing to merge");
  return merge_tree(parts, 0, parts.size());
}

/// One accumulator per chunk; chunk c draws from chunk_engine(seed, c).
/// Chunks are processed on a thread pool, the output is in chunk order.
template <typename Scalar = double>
std::vector<MomentAccumulator<Scalar>> accumulate_chunks(const StochasticModel& model,
                                                         const MonteCarloOptions& opt) {
  if (opt.n_samples < 1) throw ValidationError("sample count must be at least 1");
  if (opt.chunk_size < 1) throw ValidationError("chunk size must be at least 1");
  const std::int64_t n_chunks = (opt.n_samples + opt.chunk_size - 1) / opt.chunk_size;
  std::vector<MomentAccumulator<Scalar>> parts(static_cast<std::size_t>(n_chunks),
                                               MomentAccumulator<Scalar>(model));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::int64_t c = next++; c < n_chunks; c = next++) {
      try {
        const std::int64_t first = c * opt.chunk_size;
        const Index len = static_cast<Index>(std::min<std::int64_t>(opt.chunk_size, opt.n_samples - first));
        auto engine = chunk_engine(opt.seed, static_cast<std::uint64_t>(c));
        parts[static_cast<std::size_t>(c)].accumulate(model, draw_batch(model, len, engine, first));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_chunks;
      }
    }
  };

  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::int64_t>(threads, n_chunks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return parts;
}

/// Seeded Monte Carlo estimate of every moment block of the model.
template <typename Scalar = double>
MomentEstimates<Scalar> estimate_moments(const StochasticModel& model, const MonteCarloOptions& opt) {
  return merge_tree(accumulate_chunks<Scalar>(model, opt)).finalize(opt.seed);
}

}  // namespace nonlin
