#pragma once

#include <string>
#include <vector>

#include "nonlin/model.hpp"

namespace nonlin {

struct BuiltinInfo {
  std::string name;
  std::string description;
  std::vector<std::string> variants;  // first entry is the default
  std::string seed_key;               // models sharing a key share Monte Carlo draws
};

const std::vector<BuiltinInfo>& builtin_catalog();
const BuiltinInfo& builtin_info(const std::string& name);

/// Noiseless measurement model from the catalog with its prior covariance
/// scaled by alpha. An empty variant selects the default units.
StochasticModel builtin_model(const std::string& name, double alpha, const std::string& variant = "");

/// GMTI sensor position [m].
inline const Eigen::Vector3d kGmtiSensor{1000.0, 1000.0, 1000.0};

}  // namespace nonlin
