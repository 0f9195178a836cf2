#include "nonlin/bench.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "nonlin/errors.hpp"
#include "nonlin/units.hpp"

namespace nonlin::bench {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SweepRecord blank_record(const PointRequest& request, const std::string& variant, const MeasureSpec& measure) {
  SweepRecord r;
  r.model = request.model;
  r.variant = variant;
  r.alpha = request.alpha;
  r.measure = measure.text();
  r.n_samples = request.n_samples;
  return r;
}

std::string resolved_variant(const PointRequest& request) {
  if (!request.variant.empty()) return request.variant;
  try {
    return builtin_info(request.model).variants.front();
  } catch (const std::exception&) {
    return "";
  }
}

}  // namespace

std::string MeasureSpec::text() const {
  switch (kind) {
    case Kind::orig: return "orig";
    case Kind::orig_normalized: return "orig_normalized";
    case Kind::diag: return "diag";
    case Kind::full: return "full";
    case Kind::general: return "general";
    case Kind::family: {
      std::string s = "family(";
      for (std::size_t i = 0; i < alphas.size(); ++i) {
        char buf[32];
        const auto end = std::to_chars(buf, buf + sizeof buf, alphas[i]).ptr;
        s += (i ? " " : "") + std::string(buf, end);
      }
      return s + ")";
    }
  }
  return "";
}

MeasureSpec parse_measure(const std::string& raw) {
  const std::string text = trim(raw);
  MeasureSpec m;
  if (text == "orig") m.kind = MeasureSpec::Kind::orig;
  else if (text == "orig_normalized") m.kind = MeasureSpec::Kind::orig_normalized;
  else if (text == "diag") m.kind = MeasureSpec::Kind::diag;
  else if (text == "full") m.kind = MeasureSpec::Kind::full;
  else if (text == "general") m.kind = MeasureSpec::Kind::general;
  else if (text.rfind("family(", 0) == 0 && text.back() == ')') {
    m.kind = MeasureSpec::Kind::family;
    std::istringstream in(text.substr(7, text.size() - 8));
    std::string tok;
    while (in >> tok) {
      std::size_t used = 0;
      double a = 0;
      try {
        a = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || !std::isfinite(a)) throw ValidationError("bad family weight '" + tok + "'");
      m.alphas.push_back(a);
    }
    if (m.alphas.empty()) throw ValidationError("family needs at least one weight");
  } else {
    throw ValidationError("unknown measure '" + text + "'");
  }
  return m;
}

std::vector<MeasureSpec> parse_measure_list(const std::string& text) {
  std::vector<MeasureSpec> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ','))
    if (!trim(item).empty()) out.push_back(parse_measure(item));
  return out;
}

void require_closed_form(const StochasticModel& model, const MeasureSpec& measure) {
  if (measure.kind == MeasureSpec::Kind::general || model.form() == NoiseForm::general) throw NoClosedForm();
}

std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& seed_key, double alpha) {
  std::uint64_t s = splitmix64(base_seed);
  s = splitmix64(s ^ fnv1a(seed_key));
  return splitmix64(s ^ std::bit_cast<std::uint64_t>(alpha));
}

Point make_point(const PointRequest& request) {
  if (request.n_samples < 2) throw ValidationError("need at least 2 samples");
  const std::string variant = resolved_variant(request);
  StochasticModel model = builtin_model(request.model, request.alpha, variant);
  MonteCarloOptions opt;
  opt.n_samples = request.n_samples;
  opt.seed = derive_seed(request.base_seed, builtin_info(request.model).seed_key, request.alpha);
  opt.threads = request.threads;
  return Point{std::move(model), variant, opt};
}

MomentEstimates<Ext> point_moments(const Point& point) { return estimate_moments<Ext>(point.model, point.options); }

WeightMatrix<Ext> make_weight(const MomentEstimates<Ext>& est, const MeasureSpec& measure) {
  switch (measure.kind) {
    case MeasureSpec::Kind::orig: return weight_identity<Ext>(est.n_y());
    case MeasureSpec::Kind::orig_normalized: return weight_legacy(est);
    case MeasureSpec::Kind::diag: return weight_diag(est);
    case MeasureSpec::Kind::full: return weight_full(est);
    case MeasureSpec::Kind::family: {
      FamilyParams<Ext> p;
      p.alphas.resize(static_cast<Index>(measure.alphas.size()));
      for (std::size_t i = 0; i < measure.alphas.size(); ++i) p.alphas(static_cast<Index>(i)) = measure.alphas[i];
      return weight_family(est, p);
    }
    case MeasureSpec::Kind::general: break;
  }
  throw NoClosedForm();
}

SweepRecord evaluate_measure(const PointRequest& request, const Point& point, const MomentEstimates<Ext>& est,
                             const MeasureSpec& measure) {
  require_closed_form(point.model, measure);
  const WeightMatrix<Ext> w = make_weight(est, measure);
  const MonResult<Ext> m = mon(est, w);
  SweepRecord r = blank_record(request, point.variant, measure);
  r.weight = w.label();
  r.value = static_cast<double>(m.value);
  r.bound = static_cast<double>(m.bound);
  r.j_det = static_cast<double>(m.j_det);
  r.j_sto = static_cast<double>(m.j_sto);
  r.n_samples = m.n_samples;
  r.seed = m.seed;
  return r;
}

std::vector<SweepRecord> run_point(const PointRequest& request) {
  const std::string variant = resolved_variant(request);
  std::vector<SweepRecord> out;
  auto fail_all = [&](const std::string& what, std::uint64_t seed) {
    for (const auto& m : request.measures) {
      SweepRecord r = blank_record(request, variant, m);
      r.seed = seed;
      r.error = what;
      out.push_back(std::move(r));
    }
    return out;
  };

  std::optional<Point> point;
  try {
    point.emplace(make_point(request));
  } catch (const std::exception& e) {
    return fail_all(e.what(), 0);
  }

  std::vector<bool> possible(request.measures.size(), true);
  bool any = false;
  for (std::size_t i = 0; i < request.measures.size(); ++i) {
    try {
      require_closed_form(point->model, request.measures[i]);
      any = true;
    } catch (const std::exception&) {
      possible[i] = false;
    }
  }

  std::optional<MomentEstimates<Ext>> est;
  std::string sampling_error;
  if (any) {
    try {
      est.emplace(point_moments(*point));
    } catch (const std::exception& e) {
      sampling_error = e.what();
    }
  }

  for (std::size_t i = 0; i < request.measures.size(); ++i) {
    const MeasureSpec& m = request.measures[i];
    try {
      if (!possible[i]) require_closed_form(point->model, m);
      if (!est) throw NumericalError(sampling_error);
      out.push_back(evaluate_measure(request, *point, *est, m));
    } catch (const std::exception& e) {
      SweepRecord r = blank_record(request, variant, m);
      r.seed = point->options.seed;
      r.error = e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::pair<double, double> legacy_envelope(const MomentEstimatesd& est, Index component,
                                          const std::vector<double>& factors) {
  const Index n_y = est.n_y();
  if (component < 0 || component >= n_y)
    throw ValidationError("envelope component " + std::to_string(component) + " out of range");
  if (factors.empty()) throw ValidationError("envelope needs at least one scale");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double k : factors) {
    Eigen::VectorXd f = Eigen::VectorXd::Ones(n_y);
    f(component) = k;
    const auto scaled = transform_estimates(est, UnitChange::output_rescale(est.n_u(), est.sigma_vv.rows(), f));
    const double v = mon(scaled, weight_legacy(scaled)).value;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

std::vector<double> exponent_grid(double lo, double hi, int points) {
  if (points < 1) throw ValidationError("grid needs at least one point");
  std::vector<double> e(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    e[static_cast<std::size_t>(i)] = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
  return e;
}

std::vector<double> log_grid(double start, double stop, int points) {
  if (!(start > 0) || !(stop > 0)) throw ValidationError("log grid bounds must be positive");
  std::vector<double> out;
  for (double e : exponent_grid(std::log10(start), std::log10(stop), points)) out.push_back(std::pow(10.0, e));
  // endpoints exactly as given
  out.front() = start;
  if (points > 1) out.back() = stop;
  return out;
}

BootstrapResult bootstrap(const StochasticModel& model, const MonteCarloOptions& options,
                          const std::vector<MeasureSpec>& measures, int replicates, std::uint64_t resample_seed) {
  if (replicates < 2) throw ValidationError("bootstrap needs at least 2 replicates");
  for (const auto& m : measures) require_closed_form(model, m);
  const auto parts = accumulate_chunks<Ext>(model, options);
  if (parts.size() < 2) throw InsufficientSamples("insufficient samples: bootstrap needs at least 2 chunks");

  auto values_of = [&](const MomentEstimates<Ext>& est) {
    std::vector<double> v;
    for (const auto& m : measures) v.push_back(static_cast<double>(mon(est, make_weight(est, m)).value));
    return v;
  };

  BootstrapResult out;
  out.values = values_of(merge_tree(parts).finalize(options.seed));
  std::vector<double> sum(measures.size(), 0.0), sum2(measures.size(), 0.0);
  std::mt19937_64 rng(resample_seed);
  std::uniform_int_distribution<std::size_t> pick(0, parts.size() - 1);
  for (int b = 0; b < replicates; ++b) {
    MomentAccumulator<Ext> acc(model);
    for (std::size_t i = 0; i < parts.size(); ++i) acc.merge(parts[pick(rng)]);
    const auto v = values_of(acc.finalize(options.seed));
    for (std::size_t k = 0; k < v.size(); ++k) {
      sum[k] += v[k];
      sum2[k] += v[k] * v[k];
    }
  }
  const double n = replicates;
  for (std::size_t k = 0; k < measures.size(); ++k) {
    const double mean = sum[k] / n;
    out.sigmas.push_back(std::sqrt(std::max(0.0, (sum2[k] - n * mean * mean) / (n - 1))));
  }
  return out;
}

double bootstrap_sigma(const StochasticModel& model, const MonteCarloOptions& options, const MeasureSpec& measure,
                       int replicates, std::uint64_t resample_seed) {
  return bootstrap(model, options, {measure}, replicates, resample_seed).sigmas.front();
}

}  // namespace nonlin::bench
