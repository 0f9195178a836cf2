#pragma once

#include <Eigen/Dense>

#include "nonlin/estimates.hpp"
#include "nonlin/model.hpp"

namespace nonlin {

/// Affine change of units: u = S_u u' + o_u, y = S_y y' + o_y, v = S_v v'.
/// Primed quantities are the ones expressed in the new units.
struct UnitChange {
  Eigen::MatrixXd s_u;
  Eigen::VectorXd o_u;
  Eigen::MatrixXd s_y;
  Eigen::VectorXd o_y;
  Eigen::MatrixXd s_v;

  static UnitChange identity(Eigen::Index n_u, Eigen::Index n_v, Eigen::Index n_y);
  static UnitChange identity_for(const StochasticModel& model);

  /// New outputs are factors .* y (e.g. 180/pi turns radians into degrees).
  static UnitChange output_rescale(Eigen::Index n_u, Eigen::Index n_v,
                                   const Eigen::VectorXd& factors);

  UnitChange inverse() const;

  /// Throws unless every scale is finite with a positive definite symmetric
  /// part and the offsets match.
  void validate() const;
};

/// Applying `first` and then `second` equals applying compose(first, second).
UnitChange compose(const UnitChange& first, const UnitChange& second);

/// The same transformation expressed in the new units:
/// g'(u', v') = S_y^{-1} (g(S_u u' + o_u, S_v v') - o_y), with priors mapped
/// through the inverse change. Sampling the result with a given seed yields
/// exactly the images of the original model's samples.
StochasticModel apply_unit_change(const StochasticModel& model, const UnitChange& change);

/// Diagonal change to base units (unit variances, centered at the means).
UnitChange base_unit_change(const MomentEstimatesd& est);

/// Moment blocks of apply_unit_change(model, change) computed from those of
/// model, without resampling.
MomentEstimatesd transform_estimates(const MomentEstimatesd& est, const UnitChange& change);

}  // namespace nonlin
