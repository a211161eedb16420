#ifndef BERGORB_EXPCLI_HPP
#define BERGORB_EXPCLI_HPP

// Experiment runner behind the command-line tool: parses a JSON config,
// runs one experiment kind, writes CSV and summary files and reports a
// verdict per check.

#include "bergorb/asymptotics.hpp"
#include "bergorb/bergman.hpp"
#include "bergorb/errors.hpp"
#include "bergorb/geometry.hpp"
#include "bergorb/precision.hpp"
#include "bergorb/weights.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace bergorb::cli {

inline constexpr const char *kToolVersion = "bergorb 0.1.0";

enum class Kind { solve_weights, check_weights, kernel, expand, remainder, singular_profile, oracle_compare };

inline const std::vector<std::pair<Kind, std::string>> &kind_names()
{
  static const std::vector<std::pair<Kind, std::string>> names{
      {Kind::solve_weights, "solve-weights"}, {Kind::check_weights, "check-weights"},
      {Kind::kernel, "kernel"},               {Kind::expand, "expand"},
      {Kind::remainder, "remainder"},         {Kind::singular_profile, "singular-profile"},
      {Kind::oracle_compare, "oracle-compare"}};
  return names;
}

inline std::string to_string(Kind k)
{
  for (const auto &[kind, name] : kind_names())
    if (kind == k)
      return name;
  return "?";
}

inline Kind kind_from_string(const std::string &s)
{
  for (const auto &[kind, name] : kind_names())
    if (name == s)
      return kind;
  throw ConfigInvalid("unknown experiment kind '" + s + "'");
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string &bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v)
{
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// ---- config -----------------------------------------------------------------------

/// Point on the moment interval: {"x": value}, {"pole": 0|1} or
/// {"distance": d, "from": 0|1} (geodesic).
struct PointSpec {
  enum class Type { moment, pole, distance } type = Type::moment;
  double value = 0;
  int side = 0;
};

struct ExperimentConfig {
  Kind kind = Kind::kernel;
  nlohmann::json effective; // canonical form that is hashed
  unsigned precision = kDefaultPrecisionBits;
  std::uint64_t seed = 0;

  std::optional<ModelDescriptor> model;
  std::vector<std::pair<std::string, WeightSystem>> weights;
  int m = 1;
  int K = 0;
  IndexWindow window;
  std::vector<int> ps;
  nlohmann::json grid = nlohmann::json::object();
  std::vector<PointSpec> points;
  int order = 1;
  int derivative = 0;
  nlohmann::json checks = nlohmann::json::object();
  double pairing_scale = kPairingScale;
  std::optional<int> calibrate_p;

  std::string config_hash() const { return hex64(fnv1a64(effective.dump())); }
};

/// Overrides taken from the command line.
struct RunOptions {
  std::filesystem::path out_dir = ".";
  std::optional<unsigned> precision;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

namespace detail {

inline const std::set<std::string> &known_keys()
{
  static const std::set<std::string> keys{
      "kind",  "description", "model",  "weights",    "m",      "K",
      "window", "p",          "grid",   "points",     "order",  "derivative",
      "checks", "precision",  "seed",   "pairing_scale", "calibrate_p"};
  return keys;
}

inline void require(const nlohmann::json &j, const char *key, Kind kind)
{
  if (!j.contains(key))
    throw ConfigInvalid("'" + to_string(kind) + "' needs field '" + key + "'");
}

/// p range: [p, ...], {"values": [...]}, {"min", "max", "step"} or
/// {"min", "max", "count", "spacing": "geometric" | "arithmetic"}.
inline std::vector<int> parse_p_range(const nlohmann::json &j)
{
  std::vector<int> ps;
  if (j.is_array()) {
    for (const auto &v : j)
      ps.push_back(v.get<int>());
  } else if (j.is_object() && j.contains("values")) {
    return parse_p_range(j.at("values"));
  } else if (j.is_object()) {
    const int lo = j.at("min").get<int>(), hi = j.at("max").get<int>();
    if (j.contains("step")) {
      const int step = j.at("step").get<int>();
      if (step < 1)
        throw ConfigInvalid("p step must be positive");
      for (int p = lo; p <= hi; p += step)
        ps.push_back(p);
    } else {
      const int count = j.at("count").get<int>();
      const std::string spacing = j.value("spacing", "geometric");
      if (count < 1 || lo < 1 || hi < lo)
        throw ConfigInvalid("p range needs 1 <= min <= max and count >= 1");
      if (spacing == "geometric") {
        ps = geometric_ps(lo, hi, count);
      } else if (spacing == "arithmetic") {
        for (int k = 0; k < count; ++k)
          ps.push_back(count == 1 ? lo
                                  : static_cast<int>(std::lround(lo + (hi - lo) * double(k) / (count - 1))));
        ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
      } else {
        throw ConfigInvalid("unknown p spacing '" + spacing + "'");
      }
    }
  } else {
    throw ConfigInvalid("p must be an array or an object");
  }
  if (ps.empty())
    throw ConfigInvalid("p range is empty");
  for (int p : ps)
    if (p < 0)
      throw ConfigInvalid("p values must be non-negative");
  return ps;
}

inline PointSpec parse_point(const nlohmann::json &j)
{
  PointSpec s;
  if (j.is_number()) {
    s.value = j.get<double>();
  } else if (j.contains("x")) {
    s.value = j.at("x").get<double>();
  } else if (j.contains("pole")) {
    s.type = PointSpec::Type::pole;
    s.side = j.at("pole").get<int>();
  } else if (j.contains("distance")) {
    s.type = PointSpec::Type::distance;
    s.value = j.at("distance").get<double>();
    s.side = j.value("from", 0);
  } else {
    throw ConfigInvalid("point needs x, pole or distance: " + j.dump());
  }
  if (s.side != 0 && s.side != 1)
    throw ConfigInvalid("pole side must be 0 or 1");
  return s;
}

inline std::vector<std::pair<std::string, WeightSystem>> parse_weights(const nlohmann::json &j)
{
  std::vector<std::pair<std::string, WeightSystem>> out;
  auto one = [&](const nlohmann::json &r) {
    WeightSystem w = weights_from_json(r);
    const std::string id = r.value("id", w.label());
    out.emplace_back(id, std::move(w));
  };
  if (j.is_array()) {
    for (const auto &r : j)
      one(r);
  } else {
    one(j);
  }
  if (out.empty())
    throw ConfigInvalid("weights list is empty");
  return out;
}

} // namespace detail

/// Validates a config and applies command-line overrides.
inline ExperimentConfig parse_config(const nlohmann::json &raw, const RunOptions &opts = {})
{
  if (!raw.is_object())
    throw ConfigInvalid("config must be a JSON object");
  for (const auto &[key, value] : raw.items())
    if (!detail::known_keys().count(key))
      throw ConfigInvalid("unknown field '" + key + "'");
  ExperimentConfig c;
  try {
    if (!raw.contains("kind"))
      throw ConfigInvalid("config needs field 'kind'");
    c.kind = kind_from_string(raw.at("kind").get<std::string>());
    const long long bits = opts.precision ? static_cast<long long>(*opts.precision)
                                          : raw.value("precision", static_cast<long long>(kDefaultPrecisionBits));
    if (bits < 64)
      throw ConfigInvalid("precision must be at least 64 bits");
    if (bits > 4096)
      throw ConfigInvalid("precision above 4096 bits is not supported");
    c.precision = static_cast<unsigned>(bits);
    c.seed = opts.seed ? *opts.seed : raw.value("seed", std::uint64_t{0});

    const Kind k = c.kind;
    const bool needs_model = k != Kind::solve_weights && k != Kind::check_weights;
    if (needs_model) {
      detail::require(raw, "model", k);
      detail::require(raw, "p", k);
      try {
        c.model = descriptor_from_json(raw.at("model"));
      } catch (const InvalidModel &e) {
        throw ConfigInvalid(e.what());
      }
      c.ps = detail::parse_p_range(raw.at("p"));
    }
    if (k == Kind::solve_weights) {
      detail::require(raw, "m", k);
      detail::require(raw, "K", k);
      detail::require(raw, "window", k);
      c.m = raw.at("m").get<int>();
      c.K = raw.at("K").get<int>();
      const auto &w = raw.at("window");
      if (!w.is_array() || w.size() != 2)
        throw ConfigInvalid("window must be [lo, hi]");
      c.window = {w[0].get<std::int64_t>(), w[1].get<std::int64_t>()};
      if (c.m < 1 || c.K < 0 || c.window.lo < 0 || c.window.hi < c.window.lo)
        throw ConfigInvalid("solve-weights needs m >= 1, K >= 0 and 0 <= lo <= hi");
    }
    if (k == Kind::check_weights) {
      detail::require(raw, "weights", k);
      detail::require(raw, "K", k);
      c.K = raw.at("K").get<int>();
      if (c.K < 0)
        throw ConfigInvalid("K must be non-negative");
    }
    if (raw.contains("weights")) {
      try {
        c.weights = detail::parse_weights(raw.at("weights"));
      } catch (const InvalidWeightSystem &e) {
        throw ConfigInvalid(e.what());
      }
    }
    if (k == Kind::expand) {
      detail::require(raw, "points", k);
      for (const auto &p : raw.at("points"))
        c.points.push_back(detail::parse_point(p));
      if (c.points.empty())
        throw ConfigInvalid("points list is empty");
    }
    c.order = raw.value("order", k == Kind::expand ? 2 : 1);
    c.derivative = raw.value("derivative", 0);
    if (c.order < 0)
      throw ConfigInvalid("order must be non-negative");
    if ((k == Kind::remainder || k == Kind::singular_profile) && c.order > 1)
      throw ConfigInvalid("predicted coefficients exist for order <= 1 only");
    if (c.derivative != 0 && c.derivative != 1)
      throw ConfigInvalid("derivative must be 0 or 1");
    if (raw.contains("grid")) {
      c.grid = raw.at("grid");
      if (!c.grid.is_object())
        throw ConfigInvalid("grid must be an object");
    }
    if (raw.contains("checks")) {
      c.checks = raw.at("checks");
      if (!c.checks.is_object())
        throw ConfigInvalid("checks must be an object");
    }
    c.pairing_scale = raw.value("pairing_scale", kPairingScale);
    if (!(c.pairing_scale > 0))
      throw ConfigInvalid("pairing_scale must be positive");
    if (raw.contains("calibrate_p"))
      c.calibrate_p = raw.at("calibrate_p").get<int>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigInvalid(std::string("malformed field: ") + e.what());
  }
  c.effective = raw;
  c.effective["precision"] = c.precision;
  c.effective["seed"] = c.seed;
  return c;
}

// ---- reporting ----------------------------------------------------------------------

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;

  std::string line() const { return std::string(pass ? "PASS " : "FAIL ") + name + ": " + detail; }
};

struct RunReport {
  std::vector<Verdict> verdicts;
  std::vector<std::filesystem::path> files;
  nlohmann::json summary;

  int exit_code() const
  {
    for (const auto &v : verdicts)
      if (!v.pass)
        return 1;
    return 0;
  }
};

namespace detail {

inline std::string num(double v)
{
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

class Writer {
 public:
  Writer(const ExperimentConfig &c, const RunOptions &o, RunReport &r) : config_(c), opts_(o), report_(r)
  {
    std::filesystem::create_directories(opts_.out_dir);
  }

  nlohmann::json header() const
  {
    return {{"tool", kToolVersion},
            {"config_hash", "fnv1a64:" + config_.config_hash()},
            {"precision_bits", config_.precision}};
  }

  void csv(const std::string &name, const std::string &body)
  {
    std::ostringstream os;
    os << "# tool: " << kToolVersion << "\n"
       << "# config_hash: fnv1a64:" << config_.config_hash() << "\n"
       << "# precision_bits: " << config_.precision << "\n"
       << "# experiment: " << to_string(config_.kind) << "\n"
       << body;
    put(name, os.str());
  }

  void json(const std::string &name, nlohmann::json body)
  {
    body["header"] = header();
    put(name, body.dump(2) + "\n");
  }

 private:
  void put(const std::string &name, const std::string &text)
  {
    const auto path = opts_.out_dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f)
      throw std::runtime_error("cannot write " + path.string());
    f << text;
    report_.files.push_back(path);
  }

  const ExperimentConfig &config_;
  const RunOptions &opts_;
  RunReport &report_;
};

inline void check(RunReport &r, std::string name, bool pass, std::string detail)
{
  r.verdicts.push_back({std::move(name), pass, std::move(detail)});
}

template <typename Real>
Location<Real> resolve_point(const OrbifoldModel<Real> &model, const PointSpec &s)
{
  switch (s.type) {
  case PointSpec::Type::pole:
    return model.at_pole(s.side);
  case PointSpec::Type::distance: {
    const Real diameter = model.distance_to_pole(model.at_pole(1 - s.side), s.side);
    if (!(s.value >= 0 && Real(s.value) <= diameter))
      throw ConfigInvalid("distance outside [0, " + num(to_double(diameter)) + "]");
    return model.at_distance(s.side, Real(s.value));
  }
  case PointSpec::Type::moment:
  default:
    if (!(s.value >= 0 && Real(s.value) <= model.volume()))
      throw ConfigInvalid("x outside [0, V]");
    return model.at_moment(Real(s.value));
  }
}

inline WeightSystem single_weights(const ExperimentConfig &c)
{
  if (c.weights.size() > 1)
    throw ConfigInvalid("this experiment takes a single weight system");
  return c.weights.empty() ? WeightSystem::unit(1) : c.weights.front().second;
}

inline RemainderGrid remainder_grid(const nlohmann::json &g)
{
  RemainderGrid r;
  r.near = g.value("near", r.near);
  r.t_max = g.value("t_max", r.t_max);
  r.far = g.value("far", r.far);
  r.beta = g.value("beta", r.beta);
  if (r.near < 1 || r.far < 0 || !(r.t_max > 0) || !(r.beta > 0))
    throw ConfigInvalid("remainder grid needs near >= 1, far >= 0, t_max > 0, beta > 0");
  return r;
}

// ---- runners ----------------------------------------------------------------------------

inline void run_solve_weights(const ExperimentConfig &c, Writer &out, RunReport &r)
{
  try {
    const WeightSystem w = solve_weights(c.m, c.K, c.window);
    nlohmann::json s = {{"experiment", "solve-weights"},
                        {"m", c.m},
                        {"K", c.K},
                        {"window", {c.window.lo, c.window.hi}},
                        {"weights", to_json(w)},
                        {"label", w.label()}};
    out.json("weights.json", s);
    r.summary = s;
    check(r, "solve-weights", w.order() >= c.K, "found " + w.label() + " of order " + std::to_string(w.order()));
  } catch (const Infeasible &e) {
    nlohmann::json s = {{"experiment", "solve-weights"}, {"infeasible", e.what()}};
    out.json("weights.json", s);
    r.summary = s;
    check(r, "solve-weights", false, e.what());
  }
}

inline void run_check_weights(const ExperimentConfig &c, Writer &out, RunReport &r)
{
  nlohmann::json list = nlohmann::json::array();
  for (const auto &[id, w] : c.weights) {
    const bool ok = check_admissible(w, c.K);
    nlohmann::json e = {{"id", id}, {"weights", to_json(w)}, {"admissible", ok}};
    if (w.m() > 1) {
      nlohmann::json roots = nlohmann::json::array();
      for (int l = 0; l <= c.K + 1; ++l)
        for (int u = 1; u < w.m(); ++u) {
          const long ord = root_order_at_one(w, l, u, 1);
          roots.push_back({{"l", l},
                           {"u", u},
                           {"order", ord == kInfiniteRootOrder ? nlohmann::json("infinite") : nlohmann::json(ord)}});
        }
      e["root_orders"] = roots;
    }
    list.push_back(e);
    check(r, "check-weights[" + id + "]", ok,
          std::string(ok ? "admissible" : "not admissible") + " at K = " + std::to_string(c.K));
  }
  r.summary = {{"experiment", "check-weights"}, {"K", c.K}, {"systems", list}};
  out.json("check-weights.json", r.summary);
}

template <typename Real>
std::vector<PointRef<Real>> kernel_points(const OrbifoldModel<Real> &model, const ExperimentConfig &c)
{
  const std::string type = c.grid.value("type", "moment");
  std::vector<PointRef<Real>> pts;
  if (type == "points") {
    for (const auto &p : c.grid.at("points")) {
      if (!p.is_array() || p.size() != 3)
        throw ConfigInvalid("chart point must be [chart, re, im]");
      const int chart = p[0].get<int>();
      if (chart != 0 && chart != 1)
        throw ConfigInvalid("chart must be 0 or 1");
      pts.push_back({chart, Real(p[1].get<double>()), Real(p[2].get<double>()), model.pole(chart).singular()});
    }
  } else if (type == "moment") {
    const int n = c.grid.value("count", 20);
    const bool jitter = c.grid.value("jitter", false);
    if (n < 1)
      throw ConfigInvalid("grid count must be positive");
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < n; ++k) {
      const double shift = jitter ? 0.8 * u(rng) - 0.4 : 0.0;
      const double theta = jitter ? 2 * M_PI * u(rng) : 0.0;
      const auto loc = model.at_moment(model.volume() * Real(k + 0.5 + shift) / n);
      pts.push_back(model.chart_point(loc, model.natural_chart(loc), Real(theta)));
    }
  } else {
    throw ConfigInvalid("unknown grid type '" + type + "'");
  }
  if (pts.empty())
    throw ConfigInvalid("kernel grid is empty");
  return pts;
}

template <typename Real>
void run_kernel(const ExperimentConfig &c, const RunOptions &o, Writer &out, RunReport &r)
{
  const auto model = make_model<Real>(*c.model);
  BergmanEngine<Real> engine(model);
  const auto pts = kernel_points(model, c);
  const auto table = build_kernel_table(engine, c.ps, pts, c.weights, o.threads);
  std::ostringstream csv;
  write_csv(csv, table);
  out.csv("kernel.csv", csv.str());
  nlohmann::json s = {{"experiment", "kernel"},
                      {"model", to_json(*c.model)},
                      {"ps", c.ps},
                      {"points", pts.size()}};
  if (c.checks.value("trace", false)) {
    const double tol = c.checks.value("trace_tolerance", 1e-8);
    std::vector<Real> defects(c.ps.size());
    parallel_for(c.ps.size(), o.threads, [&](std::size_t i) { defects[i] = engine.trace_defect(c.ps[i]); });
    nlohmann::json tr = nlohmann::json::array();
    for (std::size_t i = 0; i < c.ps.size(); ++i) {
      const double dd = to_double(defects[i]);
      tr.push_back({{"p", c.ps[i]}, {"dimension", dimension(model, c.ps[i])}, {"relative_defect", dd}});
      check(r, "trace[p=" + std::to_string(c.ps[i]) + "]", dd <= tol,
            "relative defect " + num(dd) + " <= " + num(tol));
    }
    s["trace"] = tr;
  }
  r.summary = s;
  out.json("kernel.summary.json", s);
}

template <typename Real>
void run_expand(const ExperimentConfig &c, const RunOptions &o, Writer &out, RunReport &r)
{
  const auto model = make_model<Real>(*c.model);
  BergmanEngine<Real> engine(model);
  const WeightSystem w = single_weights(c);
  const Regime regime = natural_regime(model);
  const double b0_tol = c.checks.value("b0_abs", 1e-3), b1_tol = c.checks.value("b1_rel", 1e-2);
  std::ostringstream csv;
  csv << "p,x,measured,model,residual\n";
  nlohmann::json fits = nlohmann::json::array();
  for (std::size_t k = 0; k < c.points.size(); ++k) {
    const auto loc = resolve_point(model, c.points[k]);
    std::vector<std::pair<int, Real>> samples(c.ps.size());
    parallel_for(c.ps.size(), o.threads, [&](std::size_t i) {
      samples[i] = {c.ps[i], engine.weighted_density(w, c.ps[i], loc)};
    });
    const auto fit = fit_expansion(samples, c.order);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const int p = samples[i].first;
      const Real measured = samples[i].second / p;
      csv << p << "," << format_sci(loc.x) << "," << format_sci(measured) << ","
          << format_sci(Real(measured - fit.residuals[i])) << "," << format_sci(fit.residuals[i]) << "\n";
    }
    const double pb0 = to_double(predicted_b(model, w, loc, 0, regime));
    const double pb1 = to_double(predicted_b(model, w, loc, 1, regime));
    std::vector<double> coef, err;
    for (std::size_t j = 0; j < fit.coefficients.size(); ++j) {
      coef.push_back(to_double(fit.coefficients[j]));
      err.push_back(to_double(fit.std_errors[j]));
    }
    fits.push_back({{"x", to_double(loc.x)},
                    {"coefficients", coef},
                    {"std_errors", err},
                    {"condition", to_double(fit.condition)},
                    {"residual_norm", to_double(fit.residual_norm())},
                    {"predicted", {pb0, pb1}},
                    {"regime", regime == Regime::kahler ? "kahler" : "general-metric"}});
    const std::string at = "[x=" + num(to_double(loc.x)) + "]";
    check(r, "expand.b0" + at, std::abs(coef[0] - pb0) <= b0_tol,
          "fitted " + num(coef[0]) + " vs predicted " + num(pb0) + ", tolerance " + num(b0_tol));
    if (c.order >= 1)
      check(r, "expand.b1" + at, std::abs(coef[1] - pb1) <= b1_tol * std::abs(pb1),
            "fitted " + num(coef[1]) + " vs predicted " + num(pb1) + ", relative tolerance " + num(b1_tol));
  }
  out.csv("expand.csv", csv.str());
  r.summary = {{"experiment", "expand"},
               {"model", to_json(*c.model)},
               {"weights", to_json(w)},
               {"ps", c.ps},
               {"order", c.order},
               {"fits", fits}};
  out.json("expand.summary.json", r.summary);
}

template <typename Real>
void run_remainder(const ExperimentConfig &c, const RunOptions &o, Writer &out, RunReport &r)
{
  const auto model = make_model<Real>(*c.model);
  BergmanEngine<Real> engine(model);
  const WeightSystem w = single_weights(c);
  const RemainderGrid grid = remainder_grid(c.grid);
  std::ostringstream csv;
  csv << "p,x,measured,model,residual\n";
  std::vector<std::pair<double, double>> sups;
  nlohmann::json per_p = nlohmann::json::array();
  for (int p : c.ps) {
    if (p < 1)
      throw ConfigInvalid("remainder needs p >= 1");
    const auto sweep = remainder_sweep(engine, w, p, grid, c.order, c.derivative, o.threads);
    for (std::size_t i = 0; i < sweep.radii.size(); ++i)
      csv << p << "," << format_sci(sweep.radii[i]) << "," << format_sci(sweep.measured[i]) << ","
          << format_sci(sweep.model[i]) << "," << format_sci(Real(sweep.measured[i] - sweep.model[i])) << "\n";
    const double sup = to_double(sweep.sup());
    sups.emplace_back(p, sup);
    per_p.push_back({{"p", p}, {"sup", sup}});
  }
  out.csv("remainder.csv", csv.str());
  nlohmann::json s = {{"experiment", "remainder"},
                      {"model", to_json(*c.model)},
                      {"weights", to_json(w)},
                      {"order", c.order},
                      {"derivative", c.derivative},
                      {"grid", {{"near", grid.near}, {"t_max", grid.t_max}, {"far", grid.far}, {"beta", grid.beta}}},
                      {"sup", per_p}};
  try {
    const SlopeFit f = decay_slope(sups, c.checks.value("noise_floor", 1e-30));
    s["slope"] = {{"value", f.slope}, {"half_width", f.half_width}, {"intercept", f.intercept}};
    if (c.checks.contains("slope")) {
      const double lo = c.checks.at("slope")[0].get<double>(), hi = c.checks.at("slope")[1].get<double>();
      check(r, "remainder.slope", f.slope >= lo && f.slope <= hi,
            "slope " + num(f.slope) + " +- " + num(f.half_width) + " in [" + num(lo) + ", " + num(hi) + "]");
    }
  } catch (const DegenerateData &e) {
    s["slope"] = nullptr;
    s["slope_note"] = e.what();
    if (c.checks.contains("slope"))
      check(r, "remainder.slope", false, e.what());
  }
  if (c.checks.contains("max_sup")) {
    const double cap = c.checks.at("max_sup").get<double>();
    double worst = 0;
    for (const auto &v : sups)
      worst = std::max(worst, v.second);
    check(r, "remainder.max_sup", worst <= cap, "largest sup " + num(worst) + " <= " + num(cap));
  }
  r.summary = s;
  out.json("remainder.summary.json", s);
}

template <typename Real>
void run_singular_profile(const ExperimentConfig &c, const RunOptions &o, Writer &out, RunReport &r)
{
  const auto model = make_model<Real>(*c.model);
  if (!model.has_singular_set())
    throw ConfigInvalid("singular-profile needs a model with a cone point");
  BergmanEngine<Real> engine(model);
  const WeightSystem w = single_weights(c);
  const double t_max = c.grid.value("t_max", 3.0);
  const int count = c.grid.value("count", 31);
  if (!(t_max > 0) || count < 2)
    throw ConfigInvalid("profile grid needs t_max > 0 and count >= 2");
  std::vector<Real> ts;
  for (int k = 0; k < count; ++k)
    ts.push_back(Real(t_max) * k / (count - 1));

  nlohmann::json s = {{"experiment", "singular-profile"},
                      {"model", to_json(*c.model)},
                      {"weights", to_json(w)},
                      {"order", c.order},
                      {"t_max", t_max},
                      {"count", count}};
  double scale = c.pairing_scale;
  if (c.calibrate_p) {
    const double fitted = calibrate_pairing_scale(engine, *c.calibrate_p, ts);
    s["calibration"] = {{"p", *c.calibrate_p}, {"pairing_scale", fitted}, {"frozen", kPairingScale}};
  }
  s["pairing_scale"] = scale;

  const double max_rel = c.checks.value("max_relative_error", 0.1);
  const double collapse_c = c.checks.value("collapse_constant", 1.0);
  std::ostringstream csv;
  csv << "p,t,measured,model,residual\n";
  std::vector<SingularProfile<Real>> profiles;
  nlohmann::json per_p = nlohmann::json::array();
  for (int p : c.ps) {
    if (p < 1)
      throw ConfigInvalid("singular-profile needs p >= 1");
    auto prof = singular_profile(engine, w, p, ts, c.order, Real(scale), o.threads);
    for (std::size_t i = 0; i < ts.size(); ++i)
      csv << p << "," << format_sci(ts[i]) << "," << format_sci(prof.measured[i]) << ","
          << format_sci(prof.model[i]) << "," << format_sci(prof.residual[i]) << "\n";
    const double e = to_double(prof.max_relative_error());
    per_p.push_back({{"p", p}, {"max_relative_error", e}});
    check(r, "profile[p=" + std::to_string(p) + "]", e <= max_rel,
          "max relative error " + num(e) + " <= " + num(max_rel));
    profiles.push_back(std::move(prof));
  }
  s["profiles"] = per_p;
  nlohmann::json collapse = nlohmann::json::array();
  for (std::size_t k = 1; k < profiles.size(); ++k) {
    const int pa = profiles[k - 1].p, pb = profiles[k].p;
    const double gap = to_double(profile_collapse(profiles[k - 1], profiles[k]));
    const double envelope = collapse_c / std::sqrt(double(std::min(pa, pb)));
    collapse.push_back({{"p", {pa, pb}}, {"max_gap", gap}, {"envelope", envelope}});
    check(r, "collapse[p=" + std::to_string(pa) + "," + std::to_string(pb) + "]", gap <= envelope,
          "max gap " + num(gap) + " <= " + num(envelope));
  }
  s["collapse"] = collapse;
  out.csv("profile.csv", csv.str());
  r.summary = s;
  out.json("profile.summary.json", s);
}

template <typename Real>
void run_oracle_compare(const ExperimentConfig &c, const RunOptions &o, Writer &out, RunReport &r)
{
  if (c.model->family != Family::football || c.model->mode != PerturbationMode::none)
    throw ConfigInvalid("oracle-compare needs an unperturbed football model");
  const auto model = make_model<Real>(*c.model);
  BergmanEngine<Real> engine(model);
  const int count = c.grid.value("count", 50);
  const double tol = c.checks.value("tolerance", 1e-8);
  if (count < 1)
    throw ConfigInvalid("grid count must be positive");
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PointRef<Real>> pts;
  for (int k = 0; k < count; ++k) {
    const int chart = u(rng) < 0.5 ? 0 : 1;
    const Real rad = model.chart_radius(chart) * Real(u(rng));
    const Real th = 2 * pi<Real>() * Real(u(rng));
    using std::cos;
    using std::sin;
    pts.push_back({chart, Real(rad * cos(th)), Real(rad * sin(th)), model.pole(chart).singular()});
  }
  std::ostringstream csv;
  csv << "p,x,measured,model,residual\n";
  nlohmann::json per_p = nlohmann::json::array();
  for (int p : c.ps) {
    std::vector<Real> direct(pts.size()), oracle(pts.size()), xs(pts.size());
    parallel_for(pts.size(), o.threads, [&](std::size_t i) {
      xs[i] = model.locate(pts[i]).x;
      direct[i] = engine.density(p, pts[i]);
      oracle[i] = quotient_oracle_density(model, p, pts[i]);
    });
    double worst = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      using std::abs;
      csv << p << "," << format_sci(xs[i]) << "," << format_sci(direct[i]) << "," << format_sci(oracle[i])
          << "," << format_sci(Real(direct[i] - oracle[i])) << "\n";
      worst = std::max(worst, to_double(Real(abs(direct[i] / oracle[i] - 1))));
    }
    per_p.push_back({{"p", p}, {"max_relative_difference", worst}});
    check(r, "oracle[p=" + std::to_string(p) + "]", worst <= tol,
          "max relative difference " + num(worst) + " <= " + num(tol));
  }
  out.csv("oracle.csv", csv.str());
  r.summary = {{"experiment", "oracle-compare"}, {"model", to_json(*c.model)}, {"points", count}, {"results", per_p}};
  out.json("oracle.summary.json", r.summary);
}

template <typename Real>
void run_typed(const ExperimentConfig &c, const RunOptions &o, Writer &out, RunReport &r)
{
  switch (c.kind) {
  case Kind::kernel:
    return run_kernel<Real>(c, o, out, r);
  case Kind::expand:
    return run_expand<Real>(c, o, out, r);
  case Kind::remainder:
    return run_remainder<Real>(c, o, out, r);
  case Kind::singular_profile:
    return run_singular_profile<Real>(c, o, out, r);
  case Kind::oracle_compare:
    return run_oracle_compare<Real>(c, o, out, r);
  default:
    throw ConfigInvalid("internal: kind has no numeric runner");
  }
}

} // namespace detail

/// Runs a validated config. Library errors propagate.
inline RunReport run(const ExperimentConfig &c, const RunOptions &o)
{
  RunReport report;
  detail::Writer out(c, o, report);
  if (c.kind == Kind::solve_weights) {
    detail::run_solve_weights(c, out, report);
  } else if (c.kind == Kind::check_weights) {
    detail::run_check_weights(c, out, report);
  } else if (c.precision == 64) {
    detail::run_typed<long double>(c, o, out, report);
  } else {
    PrecisionScope scope(c.precision);
    detail::run_typed<ext_real>(c, o, out, report);
  }
  return report;
}

/// Parses, runs and prints one verdict line per check. Returns the exit
/// status: 0 all checks pass, 1 a check failed, 2 configuration or runtime
/// error.
inline int run_and_report(const nlohmann::json &raw, const RunOptions &o, std::ostream &os,
                          std::ostream &err)
{
  try {
    const ExperimentConfig c = parse_config(raw, o);
    const RunReport r = run(c, o);
    for (const auto &v : r.verdicts)
      os << v.line() << "\n";
    for (const auto &f : r.files)
      os << "wrote " << f.string() << "\n";
    return r.exit_code();
  } catch (const ConfigInvalid &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

inline nlohmann::json load_config(const std::filesystem::path &path)
{
  std::ifstream f(path);
  if (!f)
    throw ConfigInvalid("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigInvalid(std::string("config is not valid JSON: ") + e.what());
  }
}

/// Model families with their parameters and constraints.
inline std::string list_models()
{
  return "projective-line  volume V > 0 (default 1); smooth sphere, Fubini-Study metric; "
         "p V must be an integer\n"
         "teardrop         m >= 2; one cone point of order m at x = 1/m, smooth pole at x = 0\n"
         "football         m >= 1, character c with gcd(c, m) = gcd(c - 1, m) = 1; "
         "two cone points of order m, quotient of the round sphere\n"
         "perturbations    any family + {\"mode\": \"prequantum-pair\" | \"metric-only\", "
         "\"amplitude\", \"center\" in (0, 1), \"width\" > 0}\n";
}

/// The listing followed by the shipped model instances as JSON descriptors.
inline std::string list_models_verbose()
{
  std::string s = list_models() + "\nshipped instances:\n";
  for (const auto &d : shipped_descriptors())
    s += "  " + d.name() + "  " + to_json(d).dump() + "\n";
  return s;
}

} // namespace bergorb::cli

#endif // BERGORB_EXPCLI_HPP
