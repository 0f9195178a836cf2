#include "nonlin/builtin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nonlin/errors.hpp"
#include "nonlin/units.hpp"

namespace nonlin {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// u = [x, y] in km
Eigen::MatrixXd cart2polar(const Eigen::MatrixXd& u, double bearing_scale) {
  Eigen::MatrixXd y(2, u.cols());
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    const double px = u(0, j), py = u(1, j);
    y(0, j) = std::hypot(px, py);
    y(1, j) = std::atan2(py, px) * bearing_scale;
  }
  return y;
}

// x = [x, y, vx, vy] in [m, m, m/s, m/s]; bearing measured from the y axis
Eigen::MatrixXd bot(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z(1, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) z(0, j) = std::atan2(x(0, j), x(1, j));
  return z;
}

Eigen::MatrixXd gmti(const Eigen::MatrixXd& x) {
  const double sx = kGmtiSensor.x(), sy = kGmtiSensor.y(), sz = kGmtiSensor.z();
  Eigen::MatrixXd z(3, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double dx = x(0, j) - sx, dy = x(1, j) - sy;
    const double range = std::sqrt(dx * dx + dy * dy + sz * sz);
    z(0, j) = range;
    z(1, j) = std::atan2(dx, dy);
    z(2, j) = (dx * x(2, j) + dy * x(3, j)) / range;
  }
  return z;
}

Eigen::MatrixXd rdcos(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z(2, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double r = std::hypot(x(0, j), x(1, j));
    z(0, j) = r;
    z(1, j) = x(0, j) / r;
  }
  return z;
}

GaussianPrior cart2polar_prior(double alpha) {
  return GaussianPrior(Eigen::Vector2d(1.0, 10.0), alpha * Eigen::Vector2d(1.0, 100.0).asDiagonal().toDenseMatrix());
}

GaussianPrior tracking_prior(double alpha) {
  Eigen::Vector4d mean(500.0, 500.0, 5.0, 8.7);
  Eigen::Vector4d var(1e3, 1e3, 1.0, 1.0);
  return GaussianPrior(mean, alpha * var.asDiagonal().toDenseMatrix());
}

StochasticModel rescaled(const StochasticModel& m, const Eigen::VectorXd& factors,
                         std::vector<std::string> units) {
  return apply_unit_change(m, UnitChange::output_rescale(m.n_u(), m.n_v(), factors))
      .with_output_units(std::move(units));
}

}  // namespace

const std::vector<BuiltinInfo>& builtin_catalog() {
  static const std::vector<BuiltinInfo> catalog = {
      {"cart2polar_rad", "Cartesian [km] to range [km] and bearing atan2(y,x) [rad]", {"km_rad"},
       "cart2polar"},
      {"cart2polar_deg", "Cartesian [km] to range [km] and bearing atan2(y,x) [deg]", {"km_deg"},
       "cart2polar"},
      {"bot", "bearings-only tracking, bearing atan2(x,y)", {"rad", "deg"}, "bot"},
      {"gmti", "range, bearing atan2(x-sx,y-sy) and range rate from a sensor at [1000,1000,1000] m",
       {"m_rad_mps", "km_deg_kmph"}, "gmti"},
      {"rdcos", "range and direction cosine x/r", {"m", "km"}, "rdcos"},
  };
  return catalog;
}

const BuiltinInfo& builtin_info(const std::string& name) {
  for (const auto& info : builtin_catalog())
    if (info.name == name) return info;
  throw ValidationError("unknown model '" + name + "'");
}

StochasticModel builtin_model(const std::string& name, double alpha, const std::string& variant) {
  const BuiltinInfo& info = builtin_info(name);
  if (!(alpha > 0) || !std::isfinite(alpha)) throw ValidationError("alpha must be positive");
  const std::string& v = variant.empty() ? info.variants.front() : variant;
  if (std::find(info.variants.begin(), info.variants.end(), v) == info.variants.end())
    throw ValidationError("model '" + name + "' has no variant '" + v + "'");

  if (name == "cart2polar_rad")
    return StochasticModel::noiseless(name, 2, [](const Eigen::MatrixXd& u) { return cart2polar(u, 1.0); },
                                      cart2polar_prior(alpha))
        .with_output_units({"km", "rad"});
  if (name == "cart2polar_deg")
    return StochasticModel::noiseless(name, 2,
                                      [](const Eigen::MatrixXd& u) { return cart2polar(u, kRadToDeg); },
                                      cart2polar_prior(alpha))
        .with_output_units({"km", "deg"});
  if (name == "bot") {
    auto m = StochasticModel::noiseless(name, 1, bot, tracking_prior(alpha)).with_output_units({"rad"});
    if (v == "deg") return rescaled(m, Eigen::VectorXd::Constant(1, kRadToDeg), {"deg"});
    return m;
  }
  if (name == "gmti") {
    auto m = StochasticModel::noiseless(name, 3, gmti, tracking_prior(alpha))
                 .with_output_units({"m", "rad", "m/s"});
    if (v == "km_deg_kmph")
      return rescaled(m, Eigen::Vector3d(1e-3, kRadToDeg, 3.6), {"km", "deg", "km/h"});
    return m;
  }
  // rdcos
  auto m = StochasticModel::noiseless(name, 2, rdcos, tracking_prior(alpha)).with_output_units({"m", "-"});
  if (v == "km") return rescaled(m, Eigen::Vector2d(1e-3, 1.0), {"km", "-"});
  return m;
}

}  // namespace nonlin
