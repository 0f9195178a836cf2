#include <doctest.h>

#include <algorithm>

#include "nonlin/moments.hpp"
#include "support.hpp"

using namespace nonlin;
using testing::max_rel_diff;
using testing::two_pass_cov;

namespace {

StochasticModel identity_model() {
  return StochasticModel::noiseless("identity", 1, [](const Eigen::MatrixXd& u) { return u; },
                                    GaussianPrior::standard(1));
}

StochasticModel square_model(double mu) {
  return StochasticModel::noiseless("square", 1, [](const Eigen::MatrixXd& u) { return u.array().square().matrix(); },
                                    GaussianPrior(Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Identity(1, 1)));
}

// y = u v with u, v ~ N(0, 1): f = 0, pi(u) = u, gamma(v) = v
StochasticModel product_model() {
  return StochasticModel::multiplicative(
      "product", 1, [](const Eigen::MatrixXd& u) { return Eigen::MatrixXd::Zero(1, u.cols()); },
      [](const Eigen::MatrixXd& u) { return u; }, GaussianPrior::standard(1), GaussianPrior::standard(1));
}

// 2-d multiplicative model with 2-d gamma and a nonlinear pi
StochasticModel rich_multiplicative() {
  auto f = [](const Eigen::MatrixXd& u) {
    Eigen::MatrixXd y(2, u.cols());
    y.row(0) = u.row(0).array().sin();
    y.row(1) = u.row(0).array() * u.row(1).array();
    return y;
  };
  auto pi = [](const Eigen::MatrixXd& u) {
    Eigen::MatrixXd p(4, u.cols());
    p.row(0) = 1.0 + u.row(0).array();
    p.row(1) = u.row(1).array().square();
    p.row(2) = 0.5 * u.row(0).array() - u.row(1).array();
    p.row(3) = Eigen::RowVectorXd::Constant(u.cols(), 2.0);
    return p;
  };
  auto gamma = [](const Eigen::MatrixXd& v) {
    Eigen::MatrixXd g(2, v.cols());
    g.row(0) = v.row(0).array().square();
    g.row(1) = v.row(1).array() + 0.3 * v.row(0).array();
    return g;
  };
  Eigen::Matrix2d cu;
  cu << 1.0, 0.3, 0.3, 0.5;
  return StochasticModel::multiplicative("rich", 2, f, pi, GaussianPrior(Eigen::Vector2d(0.5, -1.0), cu),
                                         GaussianPrior::standard(2), gamma, 2);
}

StochasticModel additive_model() {
  auto f = [](const Eigen::MatrixXd& u) {
    Eigen::MatrixXd y(2, u.cols());
    y.row(0) = u.row(0).array().exp();
    y.row(1) = u.row(0).array() + 2.0 * u.row(1).array();
    return y;
  };
  Eigen::Matrix2d cv;
  cv << 0.5, 0.1, 0.1, 0.2;
  return StochasticModel::additive("additive", 2, f, GaussianPrior(Eigen::Vector2d(0.1, 2.0), Eigen::Matrix2d::Identity() * 0.3),
                                   GaussianPrior(Eigen::Vector2d::Zero(), cv));
}

StochasticModel general_model() {
  return StochasticModel::general(
      "general", 1,
      [](const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
        return Eigen::MatrixXd((u.array() * v.array().exp()).matrix());
      },
      GaussianPrior::standard(1), GaussianPrior::standard(1));
}

struct Stored {
  SampleBatch batch;
  ModelEvaluation eval;
};

Stored stored_samples(const StochasticModel& m, Eigen::Index n, std::uint64_t seed) {
  auto engine = chunk_engine(seed, 0);
  Stored s{draw_batch(m, n, engine), {}};
  s.eval = m.evaluate(s.batch.u, s.batch.v);
  return s;
}

// accumulator over the stored samples, fed in uneven batches
MomentAccumulator<double> accumulate_in_pieces(const StochasticModel& m, const SampleBatch& b,
                                               std::vector<Eigen::Index> cuts) {
  MomentAccumulator<double> acc(m);
  cuts.insert(cuts.begin(), 0);
  cuts.push_back(b.u.cols());
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    SampleBatch piece{b.u.middleCols(cuts[k], cuts[k + 1] - cuts[k]), b.v.middleCols(cuts[k], cuts[k + 1] - cuts[k]),
                      cuts[k]};
    acc.accumulate(m, piece);
  }
  return acc;
}

void check_against_two_pass(const StochasticModel& m, const MomentEstimatesd& e, const Stored& s) {
  const auto& u = s.batch.u;
  CHECK(max_rel_diff(e.sigma_uu, two_pass_cov(u, u)) < 1e-9);
  CHECK(max_rel_diff(e.mean_u, u.rowwise().mean()) < 1e-9);
  if (m.n_v() > 0) CHECK(max_rel_diff(e.sigma_vv, two_pass_cov(s.batch.v, s.batch.v)) < 1e-9);
  if (m.form() != NoiseForm::general) {
    CHECK(max_rel_diff(e.sigma_ff, two_pass_cov(s.eval.f, s.eval.f)) < 1e-9);
    CHECK(max_rel_diff(e.sigma_fu, two_pass_cov(s.eval.f, u)) < 1e-9);
  }
  if (m.form() == NoiseForm::multiplicative) {
    CHECK(max_rel_diff(e.sigma_gamma_gamma, two_pass_cov(s.eval.gamma, s.eval.gamma)) < 1e-9);
    CHECK(max_rel_diff(e.m_pi_tilde, testing::two_pass_m_pi_tilde(s.eval.pi, s.eval.gamma, m.n_y())) < 1e-9);
    Eigen::VectorXd pbar = s.eval.pi.rowwise().mean();
    CHECK(max_rel_diff(e.pi_bar, Eigen::Map<Eigen::MatrixXd>(pbar.data(), m.n_y(), m.n_gamma())) < 1e-9);
  } else {
    CHECK(max_rel_diff(e.sigma_gg, two_pass_cov(s.eval.g, s.eval.g)) < 1e-9);
    CHECK(max_rel_diff(e.sigma_gu, two_pass_cov(s.eval.g, u)) < 1e-9);
    CHECK(max_rel_diff(e.mean_g, s.eval.g.rowwise().mean()) < 1e-9);
  }
}

bool is_psd(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return true;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff())) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  return es.eigenvalues().minCoeff() >= -1e-10 * std::abs(m.trace()) / static_cast<double>(m.rows());
}

}  // namespace

TEST_CASE("identity model recovers the input covariance") {
  auto e = estimate_moments(identity_model(), {100000, 3});
  CHECK(e.sigma_uu(0, 0) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(e.sigma_gu(0, 0) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("constant model has exactly zero output variance") {
  auto m = StochasticModel::noiseless("const", 2, [](const Eigen::MatrixXd& u) {
    Eigen::MatrixXd y(2, u.cols());
    y.row(0).setConstant(0.1);
    y.row(1).setConstant(-7.3);
    return y;
  }, GaussianPrior::standard(3));
  auto e = estimate_moments(m, {100003, 8, 4096});
  CHECK(e.sigma_gg.isZero(0.0));
  CHECK(e.sigma_gu.isZero(0.0));
  CHECK(e.mean_g(0) == 0.1);
}

TEST_CASE("two samples by hand") {
  auto m = identity_model();
  MomentAccumulator<double> acc(m);
  acc.accumulate(m, SampleBatch{Eigen::RowVector2d(0.0, 2.0), Eigen::MatrixXd(0, 2), 0});
  auto e = acc.finalize();
  CHECK(e.sigma_uu(0, 0) == 2.0);
  CHECK(e.mean_u(0) == 1.0);
}

TEST_CASE("finalize needs two samples") {
  auto m = identity_model();
  MomentAccumulator<double> acc(m);
  CHECK_THROWS_AS(acc.finalize(), InsufficientSamples);
  acc.accumulate(m, SampleBatch{Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::MatrixXd(0, 1), 0});
  CHECK_THROWS_AS(acc.finalize(), InsufficientSamples);
}

TEST_CASE("square of a shifted gaussian matches analytic moments") {
  const auto mom = testing::gaussian_raw_moments(1.0, 1.0, 4);
  const double var_f = mom[4] - mom[2] * mom[2];  // 6
  const double cov_fu = mom[3] - mom[2] * mom[1];  // 2
  CHECK(var_f == doctest::Approx(6.0));
  CHECK(cov_fu == doctest::Approx(2.0));
  auto e = estimate_moments(square_model(1.0), {1000000, 17});
  CHECK(e.sigma_ff(0, 0) == doctest::Approx(var_f).epsilon(0.02));
  CHECK(e.sigma_fu(0, 0) == doctest::Approx(cov_fu).epsilon(0.02));
}

TEST_CASE("product noise moments") {
  auto e = estimate_moments(product_model(), {1000000, 5});
  REQUIRE(e.form == NoiseForm::multiplicative);
  CHECK(std::abs(e.pi_bar(0, 0)) < 0.01);
  CHECK(e.m_pi_tilde(0, 0) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(e.sigma_gamma_gamma(0, 0) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("merge with an empty accumulator is the identity") {
  auto m = rich_multiplicative();
  auto parts = accumulate_chunks<double>(m, {5000, 2, 1000});
  auto full = merge_tree(parts);
  MomentAccumulator<double> empty(m);
  auto a = merge(full, empty);
  auto b = merge(empty, full);
  CHECK(a.mean() == full.mean());
  CHECK(a.comoment() == full.comoment());
  CHECK(b.comoment() == full.comoment());
  CHECK(a.count() == full.count());
}

TEST_CASE("merge is commutative and associative") {
  std::mt19937_64 rng(123);
  auto m = rich_multiplicative();
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> len(2, 700);
    auto make = [&](std::uint64_t seed) {
      MomentAccumulator<double> acc(m);
      auto engine = chunk_engine(seed, 0);
      acc.accumulate(m, draw_batch(m, len(rng), engine));
      return acc;
    };
    auto a = make(rng()), b = make(rng()), c = make(rng());
    auto ab = merge(a, b).finalize(), ba = merge(b, a).finalize();
    CHECK(max_rel_diff(ab.sigma_gg, ba.sigma_gg) < 1e-12);
    CHECK(max_rel_diff(ab.m_pi_tilde, ba.m_pi_tilde) < 1e-12);
    auto left = merge(merge(a, b), c).finalize();
    auto right = merge(a, merge(b, c)).finalize();
    CHECK(max_rel_diff(left.sigma_gg, right.sigma_gg) < 1e-12);
    CHECK(max_rel_diff(left.sigma_fu, right.sigma_fu) < 1e-12);
    CHECK(max_rel_diff(left.m_pi_tilde, right.m_pi_tilde) < 1e-12);
    CHECK(max_rel_diff(left.mean_u, right.mean_u) < 1e-12);
  }
}

TEST_CASE("merge tree over chunks matches a two-pass covariance") {
  auto m = additive_model();
  auto s = stored_samples(m, 10000, 77);
  std::vector<MomentAccumulator<double>> parts;
  for (Eigen::Index c = 0; c < 10; ++c) {
    MomentAccumulator<double> acc(m);
    acc.accumulate(m, SampleBatch{s.batch.u.middleCols(c * 1000, 1000), s.batch.v.middleCols(c * 1000, 1000), c * 1000});
    parts.push_back(acc);
  }
  auto tree = merge_tree(parts).finalize();
  check_against_two_pass(m, tree, s);
  MomentAccumulator<double> single(m);
  single.accumulate(m, s.batch);
  CHECK(max_rel_diff(tree.sigma_gg, single.finalize().sigma_gg) < 1e-9);
}

TEST_CASE("streaming estimates match the two-pass oracle for every form") {
  for (const auto& m : {identity_model(), additive_model(), rich_multiplicative(), product_model(), general_model()}) {
    CAPTURE(m.name());
    auto s = stored_samples(m, 10000, 31);
    auto acc = accumulate_in_pieces(m, s.batch, {1, 7, 500, 4096, 9000});
    check_against_two_pass(m, acc.finalize(), s);
  }
}

TEST_CASE("identical seed and chunking give bit-identical estimates") {
  auto m = rich_multiplicative();
  MonteCarloOptions opt{50000, 99, 4096, 1};
  auto a = estimate_moments(m, opt);
  opt.threads = 4;
  auto b = estimate_moments(m, opt);
  CHECK(a.sigma_gg == b.sigma_gg);
  CHECK(a.m_pi_tilde == b.m_pi_tilde);
  CHECK(a.sigma_fu == b.sigma_fu);
  CHECK(a.mean_u == b.mean_u);
  CHECK(a.seed == 99);
}

TEST_CASE("finalized blocks are symmetric PSD") {
  for (const auto& m : {additive_model(), rich_multiplicative()}) {
    auto e = estimate_moments(m, {20000, 4});
    CHECK(is_psd(e.sigma_uu));
    CHECK(is_psd(e.sigma_gg));
    CHECK(is_psd(e.sigma_ff));
    CHECK(is_psd(e.sigma_vv));
    if (m.form() == NoiseForm::multiplicative) CHECK(is_psd(e.m_pi_tilde));
  }
}

TEST_CASE("additive blocks: sigma_gu = sigma_fu and sigma_gg = sigma_ff + G sigma_vv G^T") {
  auto m = additive_model();
  auto e = estimate_moments(m, {400000, 8});
  CHECK(max_rel_diff(e.sigma_gu, e.sigma_fu) < 0.02);
  CHECK(max_rel_diff(e.sigma_gg, e.sigma_ff + m.prior_v().cov()) < 0.02);
}

TEST_CASE("multiplicative blocks satisfy the conditional identities exactly") {
  auto e = estimate_moments(rich_multiplicative(), {20000, 12});
  CHECK(e.sigma_gu == e.sigma_fu);
  Eigen::MatrixXd expected = e.sigma_ff + e.m_pi_tilde + e.pi_bar * e.sigma_gamma_gamma * e.pi_bar.transpose();
  CHECK(max_rel_diff(e.sigma_gg, expected) < 1e-14);
}

TEST_CASE("non-finite output reports the sample index") {
  auto m = StochasticModel::noiseless("sqrt", 1, [](const Eigen::MatrixXd& u) { return u.array().sqrt().matrix(); },
                                      GaussianPrior::standard(1));
  MomentAccumulator<double> acc(m);
  Eigen::RowVectorXd u(5);
  u << 1.0, 2.0, 3.0, -1.0, 4.0;
  try {
    acc.accumulate(m, SampleBatch{u, Eigen::MatrixXd(0, 5), 100});
    FAIL("expected NonFiniteOutput");
  } catch (const NonFiniteOutput& e) {
    CHECK(e.sample_index() == 103);
  }
}

TEST_CASE("merging accumulators of different shape fails") {
  MomentAccumulator<double> a(identity_model());
  MomentAccumulator<double> b(additive_model());
  CHECK_THROWS_AS(a.merge(b), DimensionMismatch);
}

TEST_CASE("long double accumulation agrees with double") {
  auto m = rich_multiplicative();
  auto d = estimate_moments<double>(m, {30000, 3});
  auto ld = estimate_moments<long double>(m, {30000, 3});
  CHECK(max_rel_diff(d.sigma_gg, ld.sigma_gg.cast<double>()) < 1e-12);
}

TEST_CASE("estimation error shrinks with the sample count") {
  // y = A u + v, exact sigma_gu = A sigma_uu
  Eigen::Matrix2d a;
  a << 2.0, -1.0, 0.5, 3.0;
  Eigen::Matrix2d cu;
  cu << 1.0, 0.4, 0.4, 2.0;
  auto m = StochasticModel::additive("linear", 2, [a](const Eigen::MatrixXd& u) { return Eigen::MatrixXd(a * u); },
                                     GaussianPrior(Eigen::Vector2d(1, -1), cu),
                                     GaussianPrior(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity() * 0.5));
  const Eigen::MatrixXd exact_gu = a * cu;
  const Eigen::MatrixXd exact_gg = a * cu * a.transpose() + Eigen::Matrix2d::Identity() * 0.5;
  std::vector<double> medians;
  for (std::int64_t n : {1000, 10000, 100000, 1000000}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto e = estimate_moments(m, {n, seed * 7919 + static_cast<std::uint64_t>(n)});
      errs.push_back(std::max((e.sigma_gu - exact_gu).norm(), (e.sigma_gg - exact_gg).norm()));
    }
    std::nth_element(errs.begin(), errs.begin() + 5, errs.end());
    medians.push_back(errs[5]);
  }
  for (std::size_t k = 1; k < medians.size(); ++k) {
    CAPTURE(k);
    CHECK(medians[k] < medians[k - 1]);
    // ~ 1/sqrt(10) per decade, with slack
    CHECK(medians[k] / medians[k - 1] < 0.6);
  }
}
