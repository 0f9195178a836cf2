#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nonlin/estimates.hpp"
#include "nonlin/prior.hpp"

namespace nonlin {

/// Column-wise map: each column of the argument is one sample.
using BatchMap = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;
/// Column-wise map of (u, v) pairs, for the general noise form.
using JointBatchMap = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, const Eigen::MatrixXd&)>;

/// Model outputs for one batch; columns are samples. pi holds vec(pi(u))
/// (column-major, n_y * n_gamma rows).
struct ModelEvaluation {
  Eigen::MatrixXd f;
  Eigen::MatrixXd g;
  Eigen::MatrixXd pi;
  Eigen::MatrixXd gamma;
};

/// A stochastic transformation y = g(u, v) with Gaussian input and noise
/// priors. Immutable once built; evaluation is const and thread-safe as long
/// as the supplied maps are.
class StochasticModel {
 public:
  static StochasticModel noiseless(std::string name, Eigen::Index n_y, BatchMap f,
                                   GaussianPrior prior_u);

  /// y = f(u) + G v. An empty noise_gain means G = I (n_v = n_y).
  static StochasticModel additive(std::string name, Eigen::Index n_y, BatchMap f,
                                  GaussianPrior prior_u, GaussianPrior prior_v,
                                  Eigen::MatrixXd noise_gain = {});

  /// y = f(u) + pi(u) gamma(v). pi returns vec(pi(u)) per column, with
  /// n_gamma columns in pi(u). Without a gamma map, gamma(v) = v. A supplied
  /// gamma is centered with a 1e5-sample pre-pass drawn from centering_seed.
  static StochasticModel multiplicative(std::string name, Eigen::Index n_y, BatchMap f, BatchMap pi,
                                        GaussianPrior prior_u, GaussianPrior prior_v,
                                        BatchMap gamma = {}, Eigen::Index n_gamma = -1,
                                        std::uint64_t centering_seed = kCenteringSeed);

  /// Constructible for completeness; the MoN rejects it (no closed form).
  static StochasticModel general(std::string name, Eigen::Index n_y, JointBatchMap g,
                                 GaussianPrior prior_u, GaussianPrior prior_v);

  static constexpr std::uint64_t kCenteringSeed = 0x9e3779b97f4a7c15ULL;
  static constexpr Eigen::Index kCenteringSamples = 100000;

  NoiseForm form() const { return form_; }
  const std::string& name() const { return name_; }
  Eigen::Index n_u() const { return prior_u_.dim(); }
  Eigen::Index n_v() const { return prior_v_.dim(); }
  Eigen::Index n_y() const { return n_y_; }
  Eigen::Index n_gamma() const { return n_gamma_; }

  const GaussianPrior& prior_u() const { return prior_u_; }
  const GaussianPrior& prior_v() const { return prior_v_; }
  const Eigen::MatrixXd& noise_gain() const { return noise_gain_; }

  const std::vector<std::string>& output_units() const { return output_units_; }
  StochasticModel with_output_units(std::vector<std::string> units) const;
  StochasticModel renamed(std::string name) const;

  Eigen::MatrixXd f(const Eigen::MatrixXd& u) const;
  Eigen::MatrixXd pi(const Eigen::MatrixXd& u) const;
  Eigen::MatrixXd gamma(const Eigen::MatrixXd& v) const;
  Eigen::MatrixXd g(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) const;

  /// All maps the moment engine needs, evaluated on the batch.
  ModelEvaluation evaluate(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) const;

  // Raw maps, used by the unit-change wrappers.
  const BatchMap& f_map() const { return f_; }
  const BatchMap& pi_map() const { return pi_; }
  const BatchMap& gamma_map() const { return gamma_; }
  const JointBatchMap& g_map() const { return g_; }

 private:
  friend class ModelBuilder;
  StochasticModel() = default;

  NoiseForm form_ = NoiseForm::noiseless;
  std::string name_;
  Eigen::Index n_y_ = 0;
  Eigen::Index n_gamma_ = 0;
  BatchMap f_;
  BatchMap pi_;
  BatchMap gamma_;
  JointBatchMap g_;
  Eigen::MatrixXd noise_gain_;
  GaussianPrior prior_u_;
  GaussianPrior prior_v_;
  std::vector<std::string> output_units_;
};

/// Low-level assembly of a StochasticModel without the constructor-side
/// checks and gamma centering; used when re-expressing an existing model.
class ModelBuilder {
 public:
  explicit ModelBuilder(const StochasticModel& base) : m_(base) {}
  ModelBuilder& f(BatchMap map) { m_.f_ = std::move(map); return *this; }
  ModelBuilder& pi(BatchMap map) { m_.pi_ = std::move(map); return *this; }
  ModelBuilder& gamma(BatchMap map) { m_.gamma_ = std::move(map); return *this; }
  ModelBuilder& g(JointBatchMap map) { m_.g_ = std::move(map); return *this; }
  ModelBuilder& noise_gain(Eigen::MatrixXd gain) { m_.noise_gain_ = std::move(gain); return *this; }
  ModelBuilder& prior_u(GaussianPrior p) { m_.prior_u_ = std::move(p); return *this; }
  ModelBuilder& prior_v(GaussianPrior p) { m_.prior_v_ = std::move(p); return *this; }
  StochasticModel build() const { return m_; }

 private:
  StochasticModel m_;
};

}  // namespace nonlin
