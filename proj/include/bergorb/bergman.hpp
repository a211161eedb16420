#ifndef BERGORB_BERGMAN_HPP
#define BERGORB_BERGMAN_HPP

// Holomorphic sections of L^p on the built-in models and the Bergman density.
//
// Sections of L^p are monomials z^{k0} in the chart at x = 0. Their moment
// weight is b = k0 / m0 in [0, pV], and they must also be monomials z^{k1},
// k1 = m1 (pV - b), in the chart at x = V. Invariance under the stabilizers
// requires k0 = a0 p (mod m0) and k1 = a1 p (mod m1). Distinct weights are
// orthogonal by S^1 symmetry, so the Gram matrix is diagonal and
//   P_p(x) = sum_b |s_b|^2(x) / ||s_b||^2,   log|s_b|^2 = b s - p phi.

#include "bergorb/detail/parallel.hpp"
#include "bergorb/errors.hpp"
#include "bergorb/geometry.hpp"
#include "bergorb/precision.hpp"
#include "bergorb/quadrature.hpp"
#include "bergorb/weights.hpp"

#include <cstdint>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace bergorb {

template <typename Real>
Real to_real(const rational &q)
{
  if constexpr (std::is_floating_point_v<Real>)
    return q.template convert_to<Real>();
  else
    return Real(numerator(q)) / Real(denominator(q));
}

/// pV as an exact rational; NonIntegralDegree when a smooth model has no
/// integral degree.
template <typename Real>
rational exact_degree(const OrbifoldModel<Real> &model, int p)
{
  const auto &d = model.descriptor();
  rational v = d.family == Family::projective_line ? rational(d.volume) : rational(1, d.m);
  rational deg = v * p;
  if (d.family == Family::projective_line && denominator(deg) != 1)
    throw NonIntegralDegree("p * volume = " + deg.str() + " is not an integer");
  return deg;
}

/// Exponent pairs (k0, k1) of the sections of L^p, ordered by k0.
template <typename Real>
std::vector<std::pair<std::int64_t, std::int64_t>> section_exponents(const OrbifoldModel<Real> &model,
                                                                     int p)
{
  if (p < 0)
    throw std::invalid_argument("p must be non-negative");
  const rational deg = exact_degree(model, p);
  const Pole &p0 = model.pole(0), &p1 = model.pole(1);
  const std::int64_t m0 = p0.order, m1 = p1.order;
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (std::int64_t k0 = 0; rational(k0, m0) <= deg; ++k0) {
    if (detail::mod_floor(k0 - std::int64_t(p0.lambda_exp) * p, m0) != 0)
      continue;
    const rational k1q = (deg - rational(k0, m0)) * m1;
    if (denominator(k1q) != 1)
      continue;
    const std::int64_t k1 = static_cast<std::int64_t>(numerator(k1q));
    if (detail::mod_floor(k1 - std::int64_t(p1.lambda_exp) * p, m1) != 0)
      continue;
    out.emplace_back(k0, k1);
  }
  return out;
}

/// dim H^0(X, L^p).
template <typename Real>
std::int64_t dimension(const OrbifoldModel<Real> &model, int p)
{
  return static_cast<std::int64_t>(section_exponents(model, p).size());
}

template <typename Real>
struct SectionEntry {
  std::int64_t k0 = 0, k1 = 0;
  Real weight = 0;   // moment weight b = k0 / m0
  Real log_norm = 0; // log of the squared L^2 norm
  Real inv_norm = 0; // exp(-log_norm)
};

template <typename Real>
struct SectionBasis {
  int p = 0;
  std::vector<SectionEntry<Real>> entries;
  /// Constant spacing of the moment weights (zero for fewer than two entries).
  Real weight_step = 0;
  /// Distinct S^1 weights: the Gram matrix is exactly diagonal.
  bool diagonal_gram = true;
  bool closed_form = false;
  int nodes = 0;                  // final quadrature node count
  Real max_relative_gap = 0;      // node-doubling discrepancy of the norms

  std::size_t size() const { return entries.size(); }
};

struct QuadratureOptions {
  int extra_nodes = 48; // nodes = p + extra_nodes, rounded up to a multiple of 32
  int max_doublings = 3;
};

namespace detail {

// log|s_b|^2 at a location, with 0 * log 0 = 0 at the poles.
template <typename Real>
Real log_section(const OrbifoldModel<Real> &model, int p, const SectionEntry<Real> &e,
                 const std::vector<Real> &logs, const std::pair<Real, Real> &q)
{
  const Real ninf = -std::numeric_limits<Real>::infinity();
  Real acc = e.weight * q.first - p * q.second;
  for (std::size_t k = 0; k < logs.size(); ++k) {
    Real c;
    if (k == model.pole_root(0))
      c = Real(e.k0);
    else if (k == model.pole_root(1))
      c = Real(e.k1);
    else
      c = (e.weight - p * model.roots()[k]) / model.root_slopes()[k];
    if (c == 0)
      continue;
    if (isinf(logs[k]))
      return ninf;
    acc += c * logs[k];
  }
  return acc;
}

// log of the squared norms with an n-node rule, by the geometric recurrence
// |s_{b + step}|^2 = |s_b|^2 exp(step * s).
template <typename Real>
std::vector<Real> log_norms_quadrature(const OrbifoldModel<Real> &model, int p,
                                       const std::vector<SectionEntry<Real>> &entries,
                                       const Real &step, int n)
{
  using std::exp;
  using std::log;
  const auto rule = gauss_legendre<Real>(n);
  const Real half = model.volume() / 2;
  std::vector<Real> term(static_cast<std::size_t>(n)), ratio(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < rule->size(); ++j) {
    const Real x = half * (1 + rule->nodes[j]);
    const Location<Real> loc = model.at_moment(x);
    const auto [s, phi] = model.potentials(loc);
    const Real wt = rule->weights[j] * half * model.density_ratio(loc).v;
    term[j] = wt * exp(entries.front().weight * s - p * phi);
    ratio[j] = exp(step * s);
  }
  std::vector<Real> out(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Real acc = 0;
    for (std::size_t j = 0; j < term.size(); ++j) {
      acc += term[j];
      term[j] *= ratio[j];
    }
    out[i] = log(acc);
  }
  return out;
}

template <typename Real>
std::vector<Real> log_factorials(std::int64_t n)
{
  using std::log;
  std::vector<Real> out(static_cast<std::size_t>(n + 1));
  out[0] = 0;
  for (std::int64_t k = 1; k <= n; ++k)
    out[static_cast<std::size_t>(k)] = out[static_cast<std::size_t>(k - 1)] + Real(log(Real(k)));
  return out;
}

} // namespace detail

/// Closed-form log-norms of the unperturbed projective line:
/// ||z^b||^2 = V^{D+1} b! (D-b)! / (D+1)!, D = pV.
template <typename Real>
std::vector<Real> fubini_study_log_norms(const OrbifoldModel<Real> &model, int p)
{
  using std::log;
  const std::int64_t deg = static_cast<std::int64_t>(numerator(exact_degree(model, p)));
  const auto lf = detail::log_factorials<Real>(deg + 1);
  const Real lv = log(model.volume());
  std::vector<Real> out;
  for (std::int64_t b = 0; b <= deg; ++b)
    out.push_back((deg + 1) * lv + lf[static_cast<std::size_t>(b)] +
                  lf[static_cast<std::size_t>(deg - b)] - lf[static_cast<std::size_t>(deg + 1)]);
  return out;
}

/// Orthogonal basis of H^0(X, L^p) with log-norms. Closed form for the
/// unperturbed projective line unless `force_quadrature` is set; otherwise
/// Gauss-Legendre in the moment coordinate, certified by node doubling.
template <typename Real>
SectionBasis<Real> section_basis(const OrbifoldModel<Real> &model, int p,
                                 QuadratureOptions opts = {}, bool force_quadrature = false)
{
  using std::abs;
  using std::exp;
  using std::pow;
  SectionBasis<Real> basis;
  basis.p = p;
  const int m0 = model.pole(0).order;
  for (const auto &[k0, k1] : section_exponents(model, p)) {
    SectionEntry<Real> e;
    e.k0 = k0;
    e.k1 = k1;
    e.weight = Real(k0) / m0;
    basis.entries.push_back(std::move(e));
  }
  if (basis.entries.empty())
    return basis;
  if (basis.entries.size() > 1) {
    const std::int64_t dk = basis.entries[1].k0 - basis.entries[0].k0;
    for (std::size_t i = 1; i < basis.entries.size(); ++i)
      if (basis.entries[i].k0 - basis.entries[i - 1].k0 != dk)
        throw std::logic_error("section weights are not equally spaced");
    basis.weight_step = Real(dk) / m0;
  }

  std::vector<Real> logs;
  if (model.fubini_study() && !force_quadrature) {
    logs = fubini_study_log_norms(model, p);
    basis.closed_form = true;
  } else {
    const Real tol = pow(epsilon<Real>(), Real(2) / 3);
    // Multiples of 32 let nearby p share cached rules.
    int n = std::max(32, (p + opts.extra_nodes + 31) / 32 * 32);
    auto coarse = detail::log_norms_quadrature(model, p, basis.entries, basis.weight_step, n);
    for (int round = 0;; ++round) {
      auto fine = detail::log_norms_quadrature(model, p, basis.entries, basis.weight_step, 2 * n);
      Real gap = 0;
      for (std::size_t i = 0; i < fine.size(); ++i) {
        const Real g = abs(fine[i] - coarse[i]);
        if (g > gap)
          gap = g;
      }
      basis.nodes = 2 * n;
      basis.max_relative_gap = gap;
      logs = std::move(fine);
      if (gap <= tol)
        break;
      if (round >= opts.max_doublings)
        throw QuadratureNotConverged("norms changed by " + std::to_string(to_double(gap)) +
                                     " between " + std::to_string(n) + " and " +
                                     std::to_string(2 * n) + " nodes at p = " + std::to_string(p));
      coarse = logs;
      n *= 2;
    }
  }
  for (std::size_t i = 0; i < logs.size(); ++i) {
    basis.entries[i].log_norm = logs[i];
    basis.entries[i].inv_norm = exp(-logs[i]);
  }
  return basis;
}

/// Bergman density P_p(x, x) at a location.
template <typename Real>
Real density_at(const OrbifoldModel<Real> &model, const SectionBasis<Real> &basis,
                const Location<Real> &loc)
{
  using std::exp;
  if (basis.entries.empty())
    return Real(0);
  const int p = basis.p;
  const bool at_pole = loc.gap_lo == 0 || loc.gap_hi == 0;
  if (at_pole || std::is_floating_point_v<Real>) {
    // Log domain: exact handling of 0 * log 0, no overflow for short types.
    const auto logs = model.log_root_distances(loc);
    const auto q = model.perturbation_integrals(loc);
    std::vector<Real> terms;
    terms.reserve(basis.size());
    for (const auto &e : basis.entries)
      terms.push_back(detail::log_section(model, p, e, logs, q) - e.log_norm);
    return exp(log_sum_exp<Real>(terms));
  }
  // Geometric recurrence; the exponent range of Real is assumed unbounded.
  const auto [s, phi] = model.potentials(loc);
  Real term = exp(basis.entries.front().weight * s - p * phi);
  const Real ratio = exp(basis.weight_step * s);
  Real acc = 0;
  for (const auto &e : basis.entries) {
    acc += term * e.inv_norm;
    term *= ratio;
  }
  return acc;
}

/// Caches section bases per p; safe to share between threads.
template <typename Real>
class BergmanEngine {
 public:
  explicit BergmanEngine(OrbifoldModel<Real> model, QuadratureOptions opts = {})
      : model_(std::move(model)), opts_(opts)
  {
  }

  const OrbifoldModel<Real> &model() const { return model_; }

  std::shared_ptr<const SectionBasis<Real>> basis(int p) const
  {
    std::shared_ptr<Slot> slot;
    {
      std::lock_guard lock(mutex_);
      auto &s = cache_[p];
      if (!s)
        s = std::make_shared<Slot>();
      slot = s;
    }
    std::call_once(slot->once, [&] {
      slot->value = std::make_shared<const SectionBasis<Real>>(section_basis(model_, p, opts_));
    });
    return slot->value;
  }

  Real density(int p, const Location<Real> &loc) const { return density_at(model_, *basis(p), loc); }

  Real density(int p, const PointRef<Real> &z) const { return density(p, model_.locate(z)); }

  /// B_p(x) = sum_i c_i P_{p+i}(x).
  Real weighted_density(const WeightSystem &w, int p, const Location<Real> &loc) const
  {
    Real acc = 0;
    for (const auto &t : w.terms())
      acc += to_real<Real>(t.coefficient) * density(p + static_cast<int>(t.index), loc);
    return acc;
  }

  Real weighted_density(const WeightSystem &w, int p, const PointRef<Real> &z) const
  {
    return weighted_density(w, p, model_.locate(z));
  }

  /// Integral of P_p over X with a rule independent of the basis nodes,
  /// divided by dim H^0 minus one.
  Real trace_defect(int p, int nodes = 0) const
  {
    using std::abs;
    const auto b = basis(p);
    if (b->entries.empty())
      return Real(0);
    // Odd, hence never one of the basis rules.
    if (nodes <= 0)
      nodes = (p + 61 + 31) / 32 * 32 + 1;
    const Real integral = integrate_gl<Real>(
        [&](const Real &x) {
          const auto loc = model_.at_moment(x);
          return density_at(model_, *b, loc) * model_.density_ratio(loc).v;
        },
        Real(0), model_.volume(), nodes);
    return abs(integral / Real(static_cast<std::int64_t>(b->size())) - 1);
  }

 private:
  struct Slot {
    std::once_flag once;
    std::shared_ptr<const SectionBasis<Real>> value;
  };
  OrbifoldModel<Real> model_;
  QuadratureOptions opts_;
  mutable std::mutex mutex_;
  mutable std::map<int, std::shared_ptr<Slot>> cache_;
};

template <typename Real>
Real density(const OrbifoldModel<Real> &model, int p, const PointRef<Real> &z)
{
  return density_at(model, section_basis(model, p), model.locate(z));
}

template <typename Real>
Real weighted_density(const OrbifoldModel<Real> &model, const WeightSystem &w, int p,
                      const PointRef<Real> &z)
{
  return BergmanEngine<Real>(model).weighted_density(w, p, z);
}

// ---- football quotient oracle ---------------------------------------------------

/// Exponent of zeta picked up by X0^{p-j} X1^j under the generator
/// [X0 : X1] -> [X0 : zeta X1] linearized with weights c on X0, c - 1 on X1.
inline std::int64_t football_character(int m, int c, int p, std::int64_t j)
{
  return detail::mod_floor(std::int64_t(c) * (p - j) + std::int64_t(c - 1) * j, m);
}

/// Upstairs exponents j in [0, p] of the invariant monomials.
inline std::vector<std::int64_t> football_invariant_exponents(int m, int c, int p)
{
  std::vector<std::int64_t> out;
  for (std::int64_t j = 0; j <= p; ++j)
    if (football_character(m, c, p, j) == 0)
      out.push_back(j);
  return out;
}

/// Orbifold density of P^1 / Z_m computed on the cover: invariant
/// Fubini-Study monomials, whose quotient L^2 mass is 1/m of the upstairs one.
template <typename Real>
Real quotient_oracle_density(const OrbifoldModel<Real> &model, int p, const PointRef<Real> &z)
{
  using std::exp;
  using std::log;
  using std::log1p;
  const auto &d = model.descriptor();
  if (d.family != Family::football || d.mode != PerturbationMode::none)
    throw InvalidModel("quotient oracle needs an unperturbed football");
  // Chart 1 carries the upstairs coordinate 1/z; either way a monomial of
  // exponent e counted from the chart centre has |.|^2 = v^e / (1 + v)^p.
  const Real v = z.abs2();
  const Real log_v = v == 0 ? Real(0) : Real(log(v));
  const Real log_1pv = log1p(v);
  const Real base = Real(log(Real(d.m))) + Real(log(Real(p + 1)));
  const auto lf = detail::log_factorials<Real>(p);
  std::vector<Real> terms;
  for (std::int64_t j : football_invariant_exponents(d.m, d.character, p)) {
    const std::int64_t e = z.chart == 0 ? j : p - j;
    if (v == 0 && e != 0)
      continue;
    const Real binom = lf[static_cast<std::size_t>(p)] - lf[static_cast<std::size_t>(j)] -
                       lf[static_cast<std::size_t>(p - j)];
    terms.push_back(base + binom + Real(e) * log_v - p * log_1pv);
  }
  if (terms.empty())
    return Real(0);
  return exp(log_sum_exp<Real>(terms));
}

// ---- kernel tables ------------------------------------------------------------

template <typename Real>
struct KernelTable {
  ModelDescriptor model;
  std::vector<int> ps;
  std::vector<PointRef<Real>> points;
  std::vector<Real> distances;
  std::vector<std::vector<Real>> density; // [p][point]
  std::vector<std::string> weight_ids;
  std::vector<std::vector<std::vector<Real>>> weighted; // [weight][p][point]
};

/// Fills a kernel table; rows are computed in parallel into fixed slots.
template <typename Real>
KernelTable<Real> build_kernel_table(const BergmanEngine<Real> &engine, const std::vector<int> &ps,
                                     const std::vector<PointRef<Real>> &points,
                                     const std::vector<std::pair<std::string, WeightSystem>> &weights,
                                     unsigned threads = 1)
{
  const auto &model = engine.model();
  KernelTable<Real> t;
  t.model = model.descriptor();
  t.ps = ps;
  t.points = points;
  std::vector<Location<Real>> locs(points.size());
  t.distances.resize(points.size());
  parallel_for(points.size(), threads, [&](std::size_t i) {
    locs[i] = model.locate(points[i]);
    t.distances[i] = model.distance_to_singular(locs[i]);
  });
  // Bases first, one per needed p, so the sweep below only reads the cache.
  std::vector<int> needed;
  for (int p : ps) {
    needed.push_back(p);
    for (const auto &[id, w] : weights)
      for (const auto &term : w.terms())
        needed.push_back(p + static_cast<int>(term.index));
  }
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  parallel_for(needed.size(), threads, [&](std::size_t i) { engine.basis(needed[i]); });

  t.density.assign(ps.size(), std::vector<Real>(points.size()));
  for (const auto &[id, w] : weights) {
    t.weight_ids.push_back(id);
    t.weighted.emplace_back(ps.size(), std::vector<Real>(points.size()));
  }
  const std::size_t cells = ps.size() * points.size();
  parallel_for(cells, threads, [&](std::size_t c) {
    const std::size_t a = c / points.size(), i = c % points.size();
    t.density[a][i] = engine.density(ps[a], locs[i]);
    for (std::size_t k = 0; k < weights.size(); ++k)
      t.weighted[k][a][i] = engine.weighted_density(weights[k].second, ps[a], locs[i]);
  });
  return t;
}

/// Scientific notation with 17 significant digits.
template <typename Real>
std::string format_sci(const Real &v)
{
  using std::isinf;
  using std::isnan;
  if (isnan(v))
    return "nan";
  if (isinf(v))
    return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::scientific << std::setprecision(16) << v;
  return os.str();
}

/// CSV rows: model, p, chart, re(z), im(z), dist_sing, density,
/// weighted_density, weight_id. One row per weight system, or one row with
/// empty weighted columns when there are none.
template <typename Real>
void write_csv(std::ostream &os, const KernelTable<Real> &t)
{
  os << "model,p,chart,re(z),im(z),dist_sing,density,weighted_density,weight_id\n";
  const std::string name = t.model.name();
  for (std::size_t a = 0; a < t.ps.size(); ++a)
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      const auto &z = t.points[i];
      const std::string prefix = name + "," + std::to_string(t.ps[a]) + "," +
                                 std::to_string(z.chart) + "," + format_sci(z.re) + "," +
                                 format_sci(z.im) + "," + format_sci(t.distances[i]) + "," +
                                 format_sci(t.density[a][i]) + ",";
      if (t.weight_ids.empty()) {
        os << prefix << ",\n";
        continue;
      }
      for (std::size_t k = 0; k < t.weight_ids.size(); ++k)
        os << prefix << format_sci(t.weighted[k][a][i]) << "," << t.weight_ids[k] << "\n";
    }
}

} // namespace bergorb

#endif // BERGORB_BERGMAN_HPP
