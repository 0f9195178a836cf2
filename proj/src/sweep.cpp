#include "nonlin/sweep.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "nonlin/errors.hpp"

namespace nonlin::bench {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

template <typename T>
T get(const pt::ptree& section, const std::string& section_name, const std::string& key, T fallback) {
  auto v = section.get_optional<std::string>(key);
  if (!v) return fallback;
  std::istringstream in(trim(*v));
  // accept 1e6 style integers
  long double x = 0;
  if (!(in >> x) || !in.eof() || !std::isfinite(static_cast<double>(x)))
    throw ValidationError("[" + section_name + "] " + key + " is not a number: " + *v);
  if constexpr (std::is_integral_v<T>) {
    if (x != std::floor(x)) throw ValidationError("[" + section_name + "] " + key + " must be an integer");
    if constexpr (std::is_unsigned_v<T>)
      if (x < 0) throw ValidationError("[" + section_name + "] " + key + " must be non-negative");
  }
  return static_cast<T>(x);
}

void only_keys(const pt::ptree& section, const std::string& name, std::set<std::string> allowed) {
  for (const auto& [key, _] : section)
    if (!allowed.empty() && !allowed.count(key)) throw ValidationError("unknown key '" + key + "' in [" + name + "]");
}

}  // namespace

std::vector<std::string> SweepConfig::variants_of(const std::string& model) const {
  auto it = variants.find(model);
  if (it != variants.end() && !it->second.empty()) return it->second;
  return {builtin_info(model).variants.front()};
}

void SweepConfig::validate() const {
  if (models.empty()) throw ValidationError("no models requested");
  if (measures.empty()) throw ValidationError("no measures requested");
  for (const auto& m : models) {
    const auto& info = builtin_info(m);
    for (const auto& v : variants_of(m))
      if (std::find(info.variants.begin(), info.variants.end(), v) == info.variants.end())
        throw ValidationError("model '" + m + "' has no variant '" + v + "'");
  }
  for (const auto& [m, _] : variants)
    if (std::find(models.begin(), models.end(), m) == models.end())
      throw ValidationError("[units] names model '" + m + "' which is not swept");
  if (!(alpha.start > 0) || !std::isfinite(alpha.start) || !std::isfinite(alpha.stop))
    throw ValidationError("alpha grid must be positive and finite");
  if (alpha.points < 1) throw ValidationError("alpha grid needs at least one point");
  if (alpha.points > 1 && !(alpha.stop > alpha.start)) throw ValidationError("alpha grid must be increasing");
  if (n_samples < 2) throw ValidationError("need at least 2 samples");
  if (envelope) {
    const auto& e = *envelope;
    const auto& info = builtin_info(e.model);
    if (!e.variant.empty() && std::find(info.variants.begin(), info.variants.end(), e.variant) == info.variants.end())
      throw ValidationError("model '" + e.model + "' has no variant '" + e.variant + "'");
    if (!std::isfinite(e.exponent_min) || !std::isfinite(e.exponent_max) || e.exponent_max < e.exponent_min)
      throw ValidationError("envelope exponent range must be finite and ordered");
    if (e.points < 1 || e.points > EnvelopeSpec::kMaxPoints)
      throw ValidationError("envelope needs 1 to 1000 points");
    const auto n_y = builtin_model(e.model, 1.0, e.variant).n_y();
    if (e.component < 0 || e.component >= n_y) throw ValidationError("envelope component out of range");
  }
}

SweepConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  for (const auto& [name, _] : tree)
    if (name != "sweep" && name != "alpha" && name != "units" && name != "envelope")
      throw ValidationError("unknown config section [" + name + "]");

  SweepConfig c;
  const pt::ptree empty;
  const auto& sweep = tree.get_child("sweep", empty);
  only_keys(sweep, "sweep", {"models", "measures", "samples", "seed", "threads", "output"});
  c.models = split_list(sweep.get<std::string>("models", ""));
  c.measures = parse_measure_list(sweep.get<std::string>("measures", ""));
  c.n_samples = get<std::int64_t>(sweep, "sweep", "samples", c.n_samples);
  c.seed = get<std::uint64_t>(sweep, "sweep", "seed", c.seed);
  c.threads = get<unsigned>(sweep, "sweep", "threads", c.threads);
  c.output = trim(sweep.get<std::string>("output", ""));

  const auto& alpha = tree.get_child("alpha", empty);
  only_keys(alpha, "alpha", {"start", "stop", "points"});
  c.alpha.start = get<double>(alpha, "alpha", "start", c.alpha.start);
  c.alpha.stop = get<double>(alpha, "alpha", "stop", c.alpha.stop);
  c.alpha.points = get<int>(alpha, "alpha", "points", c.alpha.points);

  for (const auto& [model, value] : tree.get_child("units", empty)) c.variants[model] = split_list(value.data());

  if (auto env = tree.get_child_optional("envelope")) {
    only_keys(*env, "envelope", {"model", "variant", "component", "exponent_min", "exponent_max", "points"});
    EnvelopeSpec e;
    e.model = trim(env->get<std::string>("model", ""));
    if (e.model.empty()) throw ValidationError("[envelope] needs a model");
    e.variant = trim(env->get<std::string>("variant", ""));
    e.component = get<int>(*env, "envelope", "component", e.component);
    e.exponent_min = get<double>(*env, "envelope", "exponent_min", e.exponent_min);
    e.exponent_max = get<double>(*env, "envelope", "exponent_max", e.exponent_max);
    e.points = get<int>(*env, "envelope", "points", e.points);
    c.envelope = e;
  }
  c.validate();
  return c;
}

SweepConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path);
  return parse_config(in);
}

std::vector<SweepRecord> run_sweep(const SweepConfig& config) {
  config.validate();
  const auto alphas = config.alpha.values();
  std::vector<SweepRecord> rows;
  for (const auto& model : config.models) {
    for (const auto& variant : config.variants_of(model)) {
      for (double a : alphas) {
        PointRequest req{model, variant, a, config.measures, config.n_samples, config.seed, config.threads};
        auto point_rows = run_point(req);
        rows.insert(rows.end(), point_rows.begin(), point_rows.end());
      }
    }
  }
  if (config.envelope) {
    const auto& env = *config.envelope;
    std::vector<double> factors;
    for (double e : exponent_grid(env.exponent_min, env.exponent_max, env.points)) factors.push_back(std::pow(10.0, e));
    const MeasureSpec measure = parse_measure("orig_normalized");
    for (double a : alphas) {
      PointRequest req{env.model, env.variant, a, {measure}, config.n_samples, config.seed, config.threads};
      SweepRecord r;
      r.model = env.model;
      r.alpha = a;
      r.measure = "envelope";
      r.weight = "legacy_normalized";
      r.n_samples = config.n_samples;
      try {
        const Point p = make_point(req);
        r.variant = p.variant;
        r.seed = p.options.seed;
        const auto est = cast_estimates<double>(point_moments(p));
        const auto [lo, hi] = legacy_envelope(est, env.component, factors);
        r.value = lo;
        r.bound = hi;
        r.n_samples = est.n_samples;
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

std::vector<std::string> sweep_metadata(const SweepConfig& config) {
  std::vector<std::string> meta;
  std::string models, measures;
  for (const auto& m : config.models) {
    models += (models.empty() ? "" : ",") + m;
    const auto vs = config.variants_of(m);
    models += "[";
    for (std::size_t i = 0; i < vs.size(); ++i) models += (i ? " " : "") + vs[i];
    models += "]";
  }
  for (const auto& m : config.measures) measures += (measures.empty() ? "" : ",") + m.text();
  meta.push_back("nonlin sweep");
  meta.push_back("models: " + models);
  meta.push_back("measures: " + measures);
  meta.push_back("alpha: log grid " + format_double(config.alpha.start) + " .. " + format_double(config.alpha.stop) +
                 ", " + std::to_string(config.alpha.points) + " points");
  meta.push_back("samples per point: " + std::to_string(config.n_samples) +
                 " (reduced from the 1e7 of the original experiments; tolerances widened accordingly)");
  meta.push_back("base seed: " + std::to_string(config.seed));
  meta.push_back("accumulation: long double");
  if (config.envelope) {
    const auto& e = *config.envelope;
    meta.push_back("envelope: " + e.model + " component " + std::to_string(e.component) + " scaled by 10^" +
                   format_double(e.exponent_min) + " .. 10^" + format_double(e.exponent_max) + ", " +
                   std::to_string(e.points) + " points; value = min, bound = max");
  }
  return meta;
}

}  // namespace nonlin::bench
