#include "nonlin/model.hpp"

#include "nonlin/errors.hpp"

namespace nonlin {

std::string to_string(NoiseForm form) {
  switch (form) {
    case NoiseForm::noiseless: return "noiseless";
    case NoiseForm::additive: return "additive";
    case NoiseForm::multiplicative: return "multiplicative";
    case NoiseForm::general: return "general";
  }
  return "unknown";
}

namespace {

void check_output(const Eigen::MatrixXd& out, Eigen::Index rows, Eigen::Index cols,
                  const std::string& what) {
  if (out.rows() != rows || out.cols() != cols)
    throw DimensionMismatch(what + " returned " + std::to_string(out.rows()) + "x" +
                            std::to_string(out.cols()) + ", expected " + std::to_string(rows) +
                            "x" + std::to_string(cols));
}

void check_rows(const Eigen::MatrixXd& in, Eigen::Index rows, const std::string& what) {
  if (in.rows() != rows)
    throw DimensionMismatch(what + " has " + std::to_string(in.rows()) + " rows, expected " +
                            std::to_string(rows));
}

void require_zero_mean(const GaussianPrior& prior) {
  if (prior.dim() > 0 && !prior.mean().isZero(0.0))
    throw ValidationError("noise prior must have zero mean");
}

}  // namespace

StochasticModel StochasticModel::noiseless(std::string name, Eigen::Index n_y, BatchMap f,
                                           GaussianPrior prior_u) {
  if (!f) throw ValidationError("model needs a map f");
  if (n_y < 1) throw ValidationError("output dimension must be positive");
  StochasticModel m;
  m.form_ = NoiseForm::noiseless;
  m.name_ = std::move(name);
  m.n_y_ = n_y;
  m.f_ = std::move(f);
  m.prior_u_ = std::move(prior_u);
  return m;
}

StochasticModel StochasticModel::additive(std::string name, Eigen::Index n_y, BatchMap f,
                                          GaussianPrior prior_u, GaussianPrior prior_v,
                                          Eigen::MatrixXd noise_gain) {
  StochasticModel m = noiseless(std::move(name), n_y, std::move(f), std::move(prior_u));
  require_zero_mean(prior_v);
  if (noise_gain.size() == 0) {
    if (prior_v.dim() != n_y)
      throw DimensionMismatch("additive noise must have the output dimension");
    noise_gain = Eigen::MatrixXd::Identity(n_y, n_y);
  }
  if (noise_gain.rows() != n_y || noise_gain.cols() != prior_v.dim())
    throw DimensionMismatch("noise gain must be n_y x n_v");
  m.form_ = NoiseForm::additive;
  m.prior_v_ = std::move(prior_v);
  m.noise_gain_ = std::move(noise_gain);
  return m;
}

StochasticModel StochasticModel::multiplicative(std::string name, Eigen::Index n_y, BatchMap f,
                                                BatchMap pi, GaussianPrior prior_u,
                                                GaussianPrior prior_v, BatchMap gamma,
                                                Eigen::Index n_gamma,
                                                std::uint64_t centering_seed) {
  StochasticModel m = noiseless(std::move(name), n_y, std::move(f), std::move(prior_u));
  if (!pi) throw ValidationError("multiplicative model needs a map pi");
  require_zero_mean(prior_v);
  m.form_ = NoiseForm::multiplicative;
  m.pi_ = std::move(pi);
  if (!gamma) {
    if (n_gamma >= 0 && n_gamma != prior_v.dim())
      throw DimensionMismatch("identity gamma has the noise dimension");
    m.n_gamma_ = prior_v.dim();
    m.gamma_ = [](const Eigen::MatrixXd& v) { return v; };
  } else {
    if (n_gamma < 1) throw ValidationError("n_gamma must be given with a custom gamma map");
    m.n_gamma_ = n_gamma;
    Eigen::MatrixXd v = sample_gaussian(prior_v, kCenteringSamples, centering_seed);
    Eigen::MatrixXd gv = gamma(v);
    check_output(gv, n_gamma, v.cols(), "gamma");
    if (!gv.allFinite()) throw NumericalError("gamma is not finite on the centering pre-pass");
    Eigen::VectorXd shift = gv.rowwise().mean();
    m.gamma_ = [gamma = std::move(gamma), shift](const Eigen::MatrixXd& v) -> Eigen::MatrixXd {
      return gamma(v).colwise() - shift;
    };
  }
  m.prior_v_ = std::move(prior_v);
  return m;
}

StochasticModel StochasticModel::general(std::string name, Eigen::Index n_y, JointBatchMap g,
                                         GaussianPrior prior_u, GaussianPrior prior_v) {
  if (!g) throw ValidationError("model needs a map g");
  if (n_y < 1) throw ValidationError("output dimension must be positive");
  require_zero_mean(prior_v);
  StochasticModel m;
  m.form_ = NoiseForm::general;
  m.name_ = std::move(name);
  m.n_y_ = n_y;
  m.g_ = std::move(g);
  m.prior_u_ = std::move(prior_u);
  m.prior_v_ = std::move(prior_v);
  return m;
}

StochasticModel StochasticModel::with_output_units(std::vector<std::string> units) const {
  if (!units.empty() && static_cast<Eigen::Index>(units.size()) != n_y_)
    throw DimensionMismatch("one unit label per output element");
  StochasticModel m = *this;
  m.output_units_ = std::move(units);
  return m;
}

StochasticModel StochasticModel::renamed(std::string name) const {
  StochasticModel m = *this;
  m.name_ = std::move(name);
  return m;
}

Eigen::MatrixXd StochasticModel::f(const Eigen::MatrixXd& u) const {
  if (form_ == NoiseForm::general) throw NoClosedForm();
  check_rows(u, n_u(), "u");
  Eigen::MatrixXd out = f_(u);
  check_output(out, n_y_, u.cols(), "f");
  return out;
}

Eigen::MatrixXd StochasticModel::pi(const Eigen::MatrixXd& u) const {
  if (form_ != NoiseForm::multiplicative) throw ValidationError("pi is defined for multiplicative models");
  check_rows(u, n_u(), "u");
  Eigen::MatrixXd out = pi_(u);
  check_output(out, n_y_ * n_gamma_, u.cols(), "pi");
  return out;
}

Eigen::MatrixXd StochasticModel::gamma(const Eigen::MatrixXd& v) const {
  if (form_ != NoiseForm::multiplicative) throw ValidationError("gamma is defined for multiplicative models");
  check_rows(v, n_v(), "v");
  Eigen::MatrixXd out = gamma_(v);
  check_output(out, n_gamma_, v.cols(), "gamma");
  return out;
}

Eigen::MatrixXd StochasticModel::g(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) const {
  return evaluate(u, v).g;
}

ModelEvaluation StochasticModel::evaluate(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) const {
  check_rows(u, n_u(), "u");
  check_rows(v, n_v(), "v");
  if (u.cols() != v.cols()) throw DimensionMismatch("u and v batches differ in length");
  ModelEvaluation e;
  switch (form_) {
    case NoiseForm::noiseless:
      e.f = f(u);
      e.g = e.f;
      break;
    case NoiseForm::additive:
      e.f = f(u);
      e.g = e.f + noise_gain_ * v;
      break;
    case NoiseForm::multiplicative: {
      e.f = f(u);
      e.pi = pi(u);
      e.gamma = gamma(v);
      e.g = e.f;
      for (Eigen::Index j = 0; j < u.cols(); ++j) {
        Eigen::Map<const Eigen::MatrixXd> p(e.pi.col(j).data(), n_y_, n_gamma_);
        e.g.col(j).noalias() += p * e.gamma.col(j);
      }
      break;
    }
    case NoiseForm::general:
      e.g = g_(u, v);
      check_output(e.g, n_y_, u.cols(), "g");
      break;
  }
  return e;
}

}  // namespace nonlin
