#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nonlin/bench.hpp"

namespace nonlin::bench {

struct AlphaGrid {
  double start = 0.1;
  double stop = 10.0;
  int points = 15;

  std::vector<double> values() const { return log_grid(start, stop, points); }
};

/// Fig. 1 style scan: legacy MoN while one output component's unit sweeps
/// over 10^exponent_min .. 10^exponent_max.
struct EnvelopeSpec {
  std::string model;
  std::string variant;
  int component = 1;
  double exponent_min = -10.0;
  double exponent_max = 10.0;
  int points = 61;

  static constexpr int kMaxPoints = 1000;
};

struct SweepConfig {
  std::vector<std::string> models;
  std::map<std::string, std::vector<std::string>> variants;  // default units when absent
  AlphaGrid alpha;
  std::vector<MeasureSpec> measures;
  std::int64_t n_samples = 1'000'000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string output;
  std::optional<EnvelopeSpec> envelope;

  /// Throws ValidationError; called before any sampling.
  void validate() const;
  std::vector<std::string> variants_of(const std::string& model) const;
};

/// INI text: sections [sweep], [alpha], [units], [envelope]. List values
/// are comma separated.
SweepConfig parse_config(std::istream& in);
SweepConfig load_config(const std::string& path);

/// Rows ordered by (model, variant, alpha index, measure), then one
/// envelope row per alpha.
std::vector<SweepRecord> run_sweep(const SweepConfig& config);

std::vector<std::string> sweep_metadata(const SweepConfig& config);

}  // namespace nonlin::bench
