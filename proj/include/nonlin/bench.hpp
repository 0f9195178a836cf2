#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nonlin/builtin.hpp"
#include "nonlin/moments.hpp"
#include "nonlin/mon.hpp"
#include "nonlin/records.hpp"

namespace nonlin::bench {

/// Accumulation and MoN arithmetic run in extended precision; results are
/// reported as double.
using Ext = long double;

struct MeasureSpec {
  enum class Kind { orig, orig_normalized, diag, full, family, general };
  Kind kind = Kind::full;
  std::vector<double> alphas;  // family only

  std::string text() const;
};

/// orig | orig_normalized | diag | full | family(a1 a2 ...) | general
MeasureSpec parse_measure(const std::string& text);

/// Comma separated measures.
std::vector<MeasureSpec> parse_measure_list(const std::string& text);

/// Throws NoClosedForm for the general measure or a general-form model.
void require_closed_form(const StochasticModel& model, const MeasureSpec& measure);

/// Seed of one (model, alpha) point. Models sharing a seed key and unit
/// variants of one model draw identical samples at equal alpha.
std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& seed_key, double alpha);

struct PointRequest {
  std::string model;
  std::string variant;  // empty: default units
  double alpha = 1.0;
  std::vector<MeasureSpec> measures;
  std::int64_t n_samples = 1'000'000;
  std::uint64_t base_seed = 1;
  unsigned threads = 0;
};

struct Point {
  StochasticModel model;
  std::string variant;
  MonteCarloOptions options;
};

Point make_point(const PointRequest& request);

MomentEstimates<Ext> point_moments(const Point& point);

WeightMatrix<Ext> make_weight(const MomentEstimates<Ext>& est, const MeasureSpec& measure);

/// Throws on any failure.
SweepRecord evaluate_measure(const PointRequest& request, const Point& point, const MomentEstimates<Ext>& est,
                             const MeasureSpec& measure);

/// One record per measure; failures become error rows.
std::vector<SweepRecord> run_point(const PointRequest& request);

/// Min and max of the legacy normalized MoN when output component
/// `component` is rescaled by each factor in turn.
std::pair<double, double> legacy_envelope(const MomentEstimatesd& est, Index component,
                                          const std::vector<double>& factors);

std::vector<double> log_grid(double start, double stop, int points);
std::vector<double> exponent_grid(double lo, double hi, int points);

struct BootstrapResult {
  std::vector<double> values;  // on the full sample
  std::vector<double> sigmas;  // spread over chunk resamples
};

/// Resamples whole chunks with replacement; every measure sees the same
/// resamples. More chunks (smaller chunk_size) give a steadier estimate.
BootstrapResult bootstrap(const StochasticModel& model, const MonteCarloOptions& options,
                          const std::vector<MeasureSpec>& measures, int replicates = 200,
                          std::uint64_t resample_seed = 1);

double bootstrap_sigma(const StochasticModel& model, const MonteCarloOptions& options, const MeasureSpec& measure,
                       int replicates = 200, std::uint64_t resample_seed = 1);

}  // namespace nonlin::bench
