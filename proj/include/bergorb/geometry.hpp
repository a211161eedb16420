#ifndef BERGORB_GEOMETRY_HPP
#define BERGORB_GEOMETRY_HPP

// S^1-invariant orbifold spheres described by a moment profile.
//
// Every built-in model is a sphere with a circle action. In the moment
// coordinate x in [0, V] the Kahler form is omega = dx ^ dtheta / (2 pi) and the
// metric is dx^2 / (4 pi f) + (f / pi) dtheta^2 for a profile f > 0 on (0, V).
// With s = log|w|^2, ds/dx = 1/f and the Kahler potential satisfies
// dphi/ds = x. A pole with f'(0) = 1/m (resp. f'(V) = -1/m) is a cone point
// of order m, smooth in the chart w = z^m.

#include "bergorb/detail/jet.hpp"
#include "bergorb/errors.hpp"
#include "bergorb/precision.hpp"
#include "bergorb/quadrature.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace bergorb {

enum class Family { projective_line, teardrop, football };
enum class PerturbationMode { none, prequantum_pair, metric_only };

inline std::string to_string(Family f)
{
  switch (f) {
  case Family::projective_line: return "projective-line";
  case Family::teardrop: return "teardrop";
  case Family::football: return "football";
  }
  return "?";
}

inline std::string to_string(PerturbationMode m)
{
  switch (m) {
  case PerturbationMode::none: return "none";
  case PerturbationMode::prequantum_pair: return "prequantum-pair";
  case PerturbationMode::metric_only: return "metric-only";
  }
  return "?";
}

/// Radial bump A * exp(-(xi - c)^2 / (2 w^2)) * (4 xi (1 - xi))^2, xi = x / V.
/// The polynomial factor makes it vanish to second order at both poles.
struct Bump {
  double amplitude = 0.0;
  double center = 0.5;
  double width = 0.15;

  bool operator==(const Bump &) const = default;

  template <typename Real>
  Jet<Real> eval(const Real &x, const Real &volume) const
  {
    const Real xi = x / volume;
    const Real c(center), w(width);
    const Jet<Real> t{xi - c, Real(1), Real(0)};
    const Jet<Real> gauss = exp(Real(-1) / (2 * w * w) * (t * t));
    const Jet<Real> q{4 * xi * (1 - xi), 4 - 8 * xi, Real(-8)};
    return chain_linear(Real(amplitude) * (gauss * (q * q)), Real(1) / volume);
  }
};

/// Structured description from which a model is rebuilt deterministically.
struct ModelDescriptor {
  Family family = Family::projective_line;
  int m = 1;
  int character = 0;   // football only
  double volume = 1.0; // projective line only
  PerturbationMode mode = PerturbationMode::none;
  Bump bump;

  bool operator==(const ModelDescriptor &) const = default;

  std::string name() const
  {
    std::string s = to_string(family);
    if (family != Family::projective_line)
      s += "-m" + std::to_string(m);
    if (family == Family::football)
      s += "-c" + std::to_string(character);
    if (mode != PerturbationMode::none)
      s += "+" + to_string(mode);
    return s;
  }
};

inline nlohmann::json to_json(const ModelDescriptor &d)
{
  nlohmann::json j;
  j["name"] = to_string(d.family);
  j["m"] = d.m;
  j["character"] = d.family == Family::football ? nlohmann::json(d.character) : nlohmann::json();
  j["volume"] = d.volume;
  if (d.mode == PerturbationMode::none) {
    j["perturbation"] = nullptr;
  } else {
    j["perturbation"] = {{"mode", to_string(d.mode)},
                         {"amplitude", d.bump.amplitude},
                         {"center", d.bump.center},
                         {"width", d.bump.width}};
  }
  return j;
}

inline ModelDescriptor descriptor_from_json(const nlohmann::json &j)
{
  try {
    ModelDescriptor d;
    const auto name = j.at("name").get<std::string>();
    if (name == "projective-line")
      d.family = Family::projective_line;
    else if (name == "teardrop")
      d.family = Family::teardrop;
    else if (name == "football")
      d.family = Family::football;
    else
      throw InvalidModel("unknown model name '" + name + "'");
    d.m = j.value("m", 1);
    if (d.family == Family::football)
      d.character = j.at("character").get<int>();
    if (d.family == Family::projective_line)
      d.volume = j.value("volume", 1.0);
    if (auto it = j.find("perturbation"); it != j.end() && !it->is_null()) {
      const auto mode = it->at("mode").get<std::string>();
      if (mode == "metric-only")
        d.mode = PerturbationMode::metric_only;
      else if (mode == "prequantum-pair")
        d.mode = PerturbationMode::prequantum_pair;
      else if (mode != "none")
        throw InvalidModel("unknown perturbation mode '" + mode + "'");
      d.bump.amplitude = it->value("amplitude", 0.0);
      d.bump.center = it->value("center", 0.5);
      d.bump.width = it->value("width", 0.15);
    }
    return d;
  } catch (const nlohmann::json::exception &e) {
    throw InvalidModel(std::string("bad model descriptor: ") + e.what());
  }
}

/// End of the moment interval: side 0 is x = 0, side 1 is x = V.
struct Pole {
  int order = 1;      // stabilizer order m_x
  int lambda_exp = 0; // fiber character a_x, lambda_x = exp(2 pi i a_x / m_x)

  bool singular() const { return order > 1; }
};

/// Chart coordinate. Chart 0 is centred at the pole x = 0, chart 1 at x = V.
template <typename Real>
struct PointRef {
  int chart = 0;
  Real re = 0, im = 0;
  bool normal = false; // z lies in the normal directions of a fixed point

  Real abs2() const { return re * re + im * im; }
};

/// Point in the moment interval with both pole gaps stored to full relative
/// precision, so points very close to either pole are represented faithfully.
template <typename Real>
struct Location {
  Real x = 0;
  Real gap_lo = 0; // x
  Real gap_hi = 0; // V - x
};

template <typename Real>
class OrbifoldModel {
 public:
  const ModelDescriptor &descriptor() const { return desc_; }
  int complex_dimension() const { return 1; }
  /// Integral of omega.
  const Real &volume() const { return volume_; }
  const Pole &pole(int side) const { return poles_[static_cast<std::size_t>(side)]; }
  bool has_singular_set() const { return poles_[0].singular() || poles_[1].singular(); }
  bool metric_only() const { return desc_.mode == PerturbationMode::metric_only; }
  bool prequantum_pair() const { return desc_.mode == PerturbationMode::prequantum_pair; }
  /// Unperturbed smooth P^1, whose section norms have a closed form.
  bool fubini_study() const
  {
    return desc_.family == Family::projective_line && desc_.mode == PerturbationMode::none;
  }

  /// Real roots r_k of the unperturbed profile, which is lead * prod(x - r_k).
  const std::vector<Real> &roots() const { return roots_; }
  /// Leading coefficient of the unperturbed profile.
  const Real &lead() const { return lead_; }
  /// f0'(r_k).
  const std::vector<Real> &root_slopes() const { return root_slopes_; }
  /// Root index sitting at pole `side`.
  std::size_t pole_root(int side) const { return pole_root_[static_cast<std::size_t>(side)]; }
  /// Chart radius: chart 0 covers x <= 3V/4, chart 1 covers x >= V/4.
  const Real &chart_radius(int chart) const { return radius_[static_cast<std::size_t>(chart)]; }

  // ---- locations ----------------------------------------------------------

  Location<Real> at_moment(const Real &x) const
  {
    if (x < 0 || x > volume_)
      throw std::invalid_argument("moment coordinate outside [0, V]");
    return {x, x, volume_ - x};
  }
  Location<Real> at_pole(int side) const
  {
    return side == 0 ? Location<Real>{Real(0), Real(0), volume_}
                     : Location<Real>{volume_, volume_, Real(0)};
  }
  /// Location at gap g from pole `side`.
  Location<Real> at_gap(int side, const Real &g) const
  {
    return side == 0 ? Location<Real>{g, g, volume_ - g}
                     : Location<Real>{volume_ - g, volume_ - g, g};
  }

  /// Point in the interior given by its logit coordinate log(x / (V - x)).
  Location<Real> at_logit(const Real &xi) const
  {
    using std::exp;
    const Real lo = volume_ / (1 + exp(-xi));
    const Real hi = volume_ / (1 + exp(xi));
    return {lo, lo, hi};
  }

  /// Resolves a chart coordinate to a moment location.
  Location<Real> locate(const PointRef<Real> &z) const
  {
    using std::log;
    if (z.chart != 0 && z.chart != 1)
      throw std::invalid_argument("chart id must be 0 or 1");
    const Real r2 = z.abs2();
    if (r2 > radius_[static_cast<std::size_t>(z.chart)] * radius_[static_cast<std::size_t>(z.chart)] *
                 (1 + Real(1e-12)))
      throw std::invalid_argument("chart coordinate outside chart domain");
    if (r2 == 0)
      return at_pole(z.chart);
    const Real lr = log(r2);
    const Real s = z.chart == 0 ? poles_[0].order * lr : -poles_[1].order * lr;
    return solve_s(s);
  }

  /// Chart coordinate of a location on the positive real axis of `chart`,
  /// rotated by angle theta.
  PointRef<Real> chart_point(const Location<Real> &loc, int chart, const Real &theta = 0) const
  {
    using std::cos;
    using std::exp;
    using std::sin;
    PointRef<Real> p;
    p.chart = chart;
    p.normal = poles_[static_cast<std::size_t>(chart)].singular();
    const Real gap = chart == 0 ? loc.gap_lo : loc.gap_hi;
    if (gap == 0)
      return p;
    const Real sv = s_coordinate(loc);
    const Real lr2 = chart == 0 ? sv / poles_[0].order : -sv / poles_[1].order;
    const Real r = exp(lr2 / 2);
    p.re = r * cos(theta);
    p.im = r * sin(theta);
    return p;
  }

  /// Chart whose centre is nearer to the location.
  int natural_chart(const Location<Real> &loc) const { return loc.gap_lo <= loc.gap_hi ? 0 : 1; }

  // ---- profile and potentials ---------------------------------------------

  /// log|x - r_k| for every root, -inf at a pole root.
  std::vector<Real> log_root_distances(const Location<Real> &loc) const
  {
    using std::abs;
    using std::log;
    std::vector<Real> out(roots_.size());
    for (std::size_t k = 0; k < roots_.size(); ++k) {
      Real d;
      if (k == pole_root_[0])
        d = loc.gap_lo;
      else if (k == pole_root_[1])
        d = loc.gap_hi;
      else
        d = abs(loc.x - roots_[k]);
      out[k] = d == 0 ? -std::numeric_limits<Real>::infinity() : Real(log(d));
    }
    return out;
  }

  /// Unperturbed profile f0 with derivatives.
  Jet<Real> base_profile(const Location<Real> &loc) const
  {
    Jet<Real> acc = Jet<Real>::constant(lead_);
    for (std::size_t k = 0; k < roots_.size(); ++k) {
      Real d = loc.x - roots_[k];
      if (k == pole_root_[0])
        d = loc.gap_lo;
      else if (k == pole_root_[1])
        d = -loc.gap_hi;
      acc = acc * Jet<Real>{d, Real(1), Real(0)};
    }
    return acc;
  }

  Jet<Real> bump(const Location<Real> &loc) const
  {
    if (desc_.mode == PerturbationMode::none)
      return {};
    return desc_.bump.eval(loc.x, volume_);
  }

  /// Profile f of the Kahler form, including a prequantum-pair perturbation.
  Jet<Real> profile(const Location<Real> &loc) const
  {
    const Jet<Real> f0 = base_profile(loc);
    if (!prequantum_pair())
      return f0;
    return f0 * (Real(1) + bump(loc));
  }

  /// Conformal density rho = Theta / omega of the Riemannian metric.
  Jet<Real> density_ratio(const Location<Real> &loc) const
  {
    if (!metric_only())
      return Jet<Real>::constant(Real(1));
    return Real(1) + bump(loc);
  }

  /// Corrections (Q0, Q1) with S0 = S0_base + Q0, S1 = S1_base + Q1 from a
  /// prequantum-pair perturbation; zero otherwise.
  std::pair<Real, Real> perturbation_integrals(const Location<Real> &loc) const
  {
    if (!prequantum_pair() || loc.x == 0)
      return {Real(0), Real(0)};
    const auto rule = gauss_legendre<Real>(kPairNodes);
    const Real half = loc.x / 2;
    Real q0 = 0, q1 = 0;
    for (std::size_t j = 0; j < rule->size(); ++j) {
      const Real t = half * (1 + rule->nodes[j]);
      const Location<Real> lt = at_moment(t);
      const Real b = bump(lt).v;
      const Real g = b / (base_profile(lt).v * (1 + b));
      q0 -= rule->weights[j] * g;
      q1 -= rule->weights[j] * t * g;
    }
    return {q0 * half, q1 * half};
  }

  /// (s, phi): s = log|w|^2 and the Kahler potential phi with dphi/ds = x,
  /// so that h^L = exp(-phi) in the trivialization by w^0.
  std::pair<Real, Real> potentials(const Location<Real> &loc) const
  {
    const auto logs = log_root_distances(loc);
    const auto [q0, q1] = perturbation_integrals(loc);
    Real s = q0, phi = q1;
    for (std::size_t k = 0; k < roots_.size(); ++k) {
      s += logs[k] / root_slopes_[k];
      if (roots_[k] != 0)
        phi += roots_[k] * logs[k] / root_slopes_[k];
    }
    return {s, phi};
  }

  Real s_coordinate(const Location<Real> &loc) const { return potentials(loc).first; }
  Real kahler_potential(const Location<Real> &loc) const { return potentials(loc).second; }

  // ---- curvature and volume -----------------------------------------------

  /// Scalar curvature r = 2K of the Riemannian metric. With `reference` set,
  /// returns the curvature of the omega metric even in metric-only mode.
  Real scalar_curvature(const Location<Real> &loc, bool reference = false) const
  {
    const Jet<Real> f = profile(loc);
    const Real k_omega = -2 * pi<Real>() * f.d2;
    if (!metric_only() || reference)
      return 2 * k_omega;
    const Jet<Real> rho = density_ratio(loc);
    // K_Theta = (K_omega + Laplacian(log(rho) / 2)) / rho.
    const Real lap = positive_laplacian_log(f, rho) / 2;
    return 2 * (k_omega + lap) / rho.v;
  }

  /// (omega / Theta, Delta log(omega / Theta)), Delta the non-negative
  /// Laplacian of the omega metric.
  std::pair<Real, Real> volume_ratio_and_laplacian(const Location<Real> &loc) const
  {
    if (!metric_only())
      return {Real(1), Real(0)};
    const Jet<Real> rho = density_ratio(loc);
    return {1 / rho.v, -positive_laplacian_log(profile(loc), rho)};
  }

  /// Integral of K dA of the Riemannian metric over the whole orbifold.
  Real gauss_bonnet_integral(int nodes = 256) const
  {
    return integrate_gl<Real>(
        [&](const Real &x) {
          const auto loc = at_moment(x);
          const Jet<Real> f = profile(loc);
          Real val = -2 * pi<Real>() * f.d2;
          if (metric_only())
            val += positive_laplacian_log(f, density_ratio(loc)) / 2;
          return val;
        },
        Real(0), volume_, nodes);
  }

  /// Orbifold Euler characteristic 1/m_0 + 1/m_1.
  Real euler_characteristic() const { return Real(1) / poles_[0].order + Real(1) / poles_[1].order; }

  /// Total Riemannian volume (equals V unless metric-only).
  Real riemannian_volume(int nodes = 256) const
  {
    if (!metric_only())
      return volume_;
    return integrate_gl<Real>([&](const Real &x) { return density_ratio(at_moment(x)).v; }, Real(0),
                              volume_, nodes);
  }

  // ---- distance -----------------------------------------------------------

  /// Geodesic distance from the location to the pole `side`.
  Real distance_to_pole(const Location<Real> &loc, int side, int nodes = kDistanceNodes) const
  {
    using std::sqrt;
    const Real half = volume_ / 2;
    const Real gap = side == 0 ? loc.gap_lo : loc.gap_hi;
    if (gap == 0)
      return Real(0);
    // Near the pole t = gap v^2 removes the square-root singularity.
    auto near = [&](const Real &g_to) {
      return integrate_gl<Real>(
          [&](const Real &v) {
            const Location<Real> l = at_gap(side, v * v);
            return 2 * v * sqrt(density_ratio(l).v / (4 * pi<Real>() * profile(l).v));
          },
          Real(0), sqrt(g_to), nodes);
    };
    if (gap <= half)
      return near(gap);
    // Beyond the midpoint the far pole needs the same treatment.
    const Real far_gap = side == 0 ? loc.gap_hi : loc.gap_lo;
    const Real tail = integrate_gl<Real>(
        [&](const Real &u) {
          const Location<Real> l = at_gap(1 - side, u * u);
          return 2 * u * sqrt(density_ratio(l).v / (4 * pi<Real>() * profile(l).v));
        },
        sqrt(far_gap), sqrt(half), nodes);
    return near(half) + tail;
  }

  /// Geodesic distance to the singular set; +inf for smooth models.
  Real distance_to_singular(const Location<Real> &loc) const
  {
    Real best = std::numeric_limits<Real>::infinity();
    for (int side = 0; side < 2; ++side)
      if (poles_[static_cast<std::size_t>(side)].singular()) {
        const Real d = distance_to_pole(loc, side);
        if (d < best)
          best = d;
      }
    return best;
  }

  /// Location at geodesic distance d from pole `side` (d at most the
  /// pole-to-pole distance).
  Location<Real> at_distance(int side, const Real &d) const
  {
    using std::abs;
    using std::sqrt;
    if (d < 0)
      throw std::invalid_argument("negative distance");
    if (d == 0)
      return at_pole(side);
    const Real total = distance_to_pole(at_pole(1 - side), side);
    if (d > total)
      throw std::invalid_argument("distance exceeds the diameter along the meridian");
    // Newton in q = sqrt(gap), where distance is close to linear.
    const Real slope0 = abs(side == 0 ? root_slopes_[pole_root_[0]] : root_slopes_[pole_root_[1]]);
    Real lo = 0, hi = sqrt(volume_);
    Real q = sqrt(pi<Real>() * slope0) * d;
    if (!(q > lo && q < hi))
      q = (lo + hi) / 2;
    const Real tol = epsilon<Real>() * 64;
    for (int it = 0; it < 200; ++it) {
      const Location<Real> l = at_gap(side, q * q);
      const Real r = distance_to_pole(l, side) - d;
      if (r > 0)
        hi = q;
      else
        lo = q;
      const Real dr = 2 * q * sqrt(density_ratio(l).v / (4 * pi<Real>() * profile(l).v));
      Real next = q - r / dr;
      if (!(next > lo && next < hi))
        next = (lo + hi) / 2;
      const Real step = abs(next - q);
      q = next;
      if (step <= tol * q || hi - lo <= tol * q)
        break;
    }
    return at_gap(side, q * q);
  }

  // ---- validation ---------------------------------------------------------

  /// Validation grid: n Chebyshev points in the open moment interval.
  std::vector<Location<Real>> validation_grid(int n = 1000) const
  {
    std::vector<Location<Real>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      // (1 - cos a) / 2 formed without cancellation.
      const Real s2 = sin_half_sq(pi<Real>() * (j + Real(0.5)) / n);
      const Real lo = volume_ * s2;
      const Real hi = volume_ * (1 - s2);
      out.push_back({lo, lo, hi});
    }
    return out;
  }

  /// sup over the grid of |d^2 phi / ds^2 - f| / f by symmetric finite
  /// differences in x, i.e. the mismatch between the curvature of h^L and
  /// omega.
  Real prequantum_residual(int n = 1000) const
  {
    using std::abs;
    using std::pow;
    using std::min;
    const Real eps = epsilon<Real>();
    Real worst = 0;
    for (const auto &loc : validation_grid(n)) {
      // Balances truncation (h/g)^2 against roundoff eps |phi| g / h^2.
      const Real g = min(loc.gap_lo, loc.gap_hi);
      const Real scale = 1 + abs(kahler_potential(loc)) / volume_;
      const Real h = g * min(Real(0.01), Real(pow(eps * scale * volume_ / g, Real(0.25))));
      auto shifted = [&](int k) {
        return Location<Real>{loc.x + k * h, loc.gap_lo + k * h, loc.gap_hi - k * h};
      };
      Real phi[5], s[5];
      for (int k = -2; k <= 2; ++k) {
        std::tie(s[k + 2], phi[k + 2]) = potentials(shifted(k));
      }
      auto dphi_ds = [&](int c) { return (phi[c + 1] - phi[c - 1]) / (s[c + 1] - s[c - 1]); };
      const Real second = (dphi_ds(3) - dphi_ds(1)) / (s[3] - s[1]);
      const Real f = profile(loc).v;
      const Real r = abs(second - f) / f;
      if (r > worst)
        worst = r;
    }
    return worst;
  }

  /// Throws MetricNotPositive if omega or the Riemannian metric degenerates
  /// on the validation grid.
  void validate_positivity(int n = 1000) const
  {
    for (const auto &loc : validation_grid(n)) {
      if (desc_.mode != PerturbationMode::none && 1 + bump(loc).v <= 0)
        throw MetricNotPositive("1 + bump <= 0 at x = " + std::to_string(to_double(loc.x)));
      if (!(profile(loc).v > 0))
        throw MetricNotPositive("profile not positive at x = " + std::to_string(to_double(loc.x)));
    }
  }

  // ---- construction -------------------------------------------------------

  OrbifoldModel(ModelDescriptor desc, Real volume, Real lead, std::vector<Real> roots,
                std::array<std::size_t, 2> pole_root, std::array<Pole, 2> poles)
      : desc_(std::move(desc)), volume_(std::move(volume)), lead_(std::move(lead)),
        roots_(std::move(roots)), pole_root_(pole_root), poles_(poles)
  {
    root_slopes_.resize(roots_.size());
    for (std::size_t k = 0; k < roots_.size(); ++k) {
      Real d = lead_;
      for (std::size_t j = 0; j < roots_.size(); ++j)
        if (j != k)
          d *= roots_[k] - roots_[j];
      root_slopes_[k] = d;
    }
    for (int side = 0; side < 2; ++side) {
      const Pole &pl = poles_[static_cast<std::size_t>(side)];
      if (pl.order < 1)
        throw InvalidModel("pole order must be positive");
      if (pl.singular() && std::gcd(pl.lambda_exp, pl.order) != 1)
        throw FiberActionNotFaithful("gcd(a, m) != 1 at a cone point");
    }
    if (desc_.mode != PerturbationMode::none) {
      if (!(desc_.bump.width > 0) || !(desc_.bump.center > 0 && desc_.bump.center < 1))
        throw InvalidModel("bump needs width > 0 and centre in (0, 1)");
      validate_positivity();
    }
    compute_radii();
  }

 private:
  static constexpr int kPairNodes = 96;
  static constexpr int kDistanceNodes = 96;

  // sin^2(a / 2) = (1 - cos a) / 2 without cancellation.
  static Real sin_half_sq(const Real &a)
  {
    using std::sin;
    const Real s = sin(a / 2);
    return s * s;
  }

  // Non-negative Laplacian of log(rho): -4 pi (f (log rho)')'.
  static Real positive_laplacian_log(const Jet<Real> &f, const Jet<Real> &rho)
  {
    const Real l1 = rho.d1 / rho.v;
    const Real l2 = (rho.d2 * rho.v - rho.d1 * rho.d1) / (rho.v * rho.v);
    return -4 * pi<Real>() * (f.d1 * l1 + f.v * l2);
  }

  void compute_radii()
  {
    using std::exp;
    const Real s0 = s_coordinate(at_moment(volume_ * 3 / 4));
    const Real s1 = s_coordinate(at_moment(volume_ / 4));
    radius_[0] = exp(s0 / (2 * poles_[0].order));
    radius_[1] = exp(-s1 / (2 * poles_[1].order));
  }

  // Inverts s(x) = target in the logit variable with a safeguarded Newton
  // iteration.
  Location<Real> solve_s(const Real &target) const
  {
    using std::abs;
    const Real tol = epsilon<Real>() * 32;
    auto residual = [&](const Real &xi) { return s_coordinate(at_logit(xi)) - target; };
    // Asymptotically s ~ m_0 xi near x = 0 and s ~ m_1 xi near x = V.
    Real xi = target < 0 ? target / poles_[0].order : target / poles_[1].order;
    Real lo = xi - 1, hi = xi + 1;
    while (residual(lo) > 0)
      lo -= 2 * (hi - lo);
    while (residual(hi) < 0)
      hi += 2 * (hi - lo);
    for (int it = 0; it < 200; ++it) {
      const Location<Real> l = at_logit(xi);
      const Real r = s_coordinate(l) - target;
      if (r == 0)
        return l;
      if (r > 0)
        hi = xi;
      else
        lo = xi;
      const Real ds = l.gap_lo * l.gap_hi / (volume_ * profile(l).v);
      Real next = xi - r / ds;
      if (!(next > lo && next < hi))
        next = (lo + hi) / 2;
      const Real step = abs(next - xi);
      xi = next;
      if (step <= tol * (1 + abs(xi)))
        break;
    }
    return at_logit(xi);
  }

  ModelDescriptor desc_;
  Real volume_;
  Real lead_;
  std::vector<Real> roots_;
  std::vector<Real> root_slopes_;
  std::array<std::size_t, 2> pole_root_;
  std::array<Pole, 2> poles_;
  std::array<Real, 2> radius_;
};

// ---- factories ----------------------------------------------------------------

/// Smooth sphere with integral of omega equal to total_volume and profile
/// x (V - x) / V.
template <typename Real>
OrbifoldModel<Real> make_projective_line(double total_volume)
{
  if (!(total_volume > 0) || !std::isfinite(total_volume))
    throw InvalidModel("total volume must be positive");
  ModelDescriptor d;
  d.family = Family::projective_line;
  d.volume = total_volume;
  const Real v(total_volume);
  return OrbifoldModel<Real>(d, v, Real(-1) / v, {Real(0), v}, {0, 1}, {Pole{1, 0}, Pole{1, 0}});
}

/// Weighted projective line P(1, m): smooth at x = 0, cone of order m at
/// x = 1/m with fiber character exponent 1. Profile x (1 - m x)(1 + (1 - m) x).
template <typename Real>
OrbifoldModel<Real> make_teardrop(int m)
{
  if (m < 2)
    throw InvalidModel("teardrop needs m >= 2");
  ModelDescriptor d;
  d.family = Family::teardrop;
  d.m = m;
  d.volume = 1.0 / m;
  const Real v = Real(1) / m;
  return OrbifoldModel<Real>(d, v, Real(m) * (m - 1), {Real(0), v, Real(1) / (m - 1)}, {0, 1},
                             {Pole{1, 0}, Pole{m, 1}});
}

/// P^1 / Z_m with the linearization of weight c on X0 and c - 1 on X1: cone
/// points of order m with characters c and 1 - c. Profile x (1 - m x) / m.
template <typename Real>
OrbifoldModel<Real> make_football(int m, int c)
{
  if (m < 1)
    throw InvalidModel("football needs m >= 1");
  if (std::gcd(c, m) != 1 || std::gcd(c - 1, m) != 1)
    throw FiberActionNotFaithful("football needs gcd(c, m) = gcd(c - 1, m) = 1");
  auto mod = [m](int a) { return ((a % m) + m) % m; };
  ModelDescriptor d;
  d.family = Family::football;
  d.m = m;
  d.character = c;
  d.volume = 1.0 / m;
  const Real v = Real(1) / m;
  const int a0 = m == 1 ? 0 : mod(c), a1 = m == 1 ? 0 : mod(1 - c);
  return OrbifoldModel<Real>(d, v, Real(-1), {Real(0), v}, {0, 1}, {Pole{m, a0}, Pole{m, a1}});
}

/// Same underlying orbifold with a radial bump. metric-only keeps omega and
/// h^L and sets the Riemannian metric to (1 + bump) g_omega; prequantum-pair
/// rescales the profile by (1 + bump), changing omega and h^L together.
template <typename Real>
OrbifoldModel<Real> perturb_metric(const OrbifoldModel<Real> &model, PerturbationMode mode,
                                   const Bump &bump)
{
  if (model.descriptor().mode != PerturbationMode::none)
    throw InvalidModel("model is already perturbed");
  ModelDescriptor d = model.descriptor();
  if (mode == PerturbationMode::none || bump.amplitude == 0.0)
    return model;
  d.mode = mode;
  d.bump = bump;
  std::array<std::size_t, 2> pr{model.pole_root(0), model.pole_root(1)};
  return OrbifoldModel<Real>(d, model.volume(), model.lead(), model.roots(), pr,
                             {model.pole(0), model.pole(1)});
}

/// Rebuilds a model from its descriptor.
template <typename Real>
OrbifoldModel<Real> make_model(const ModelDescriptor &d)
{
  auto base = [&]() {
    switch (d.family) {
    case Family::projective_line: return make_projective_line<Real>(d.volume);
    case Family::teardrop: return make_teardrop<Real>(d.m);
    case Family::football: return make_football<Real>(d.m, d.character);
    }
    throw InvalidModel("unknown family");
  }();
  return perturb_metric(base, d.mode, d.bump);
}

/// Models used by the shipped configs and the acceptance checks.
inline std::vector<ModelDescriptor> shipped_descriptors()
{
  using F = Family;
  using M = PerturbationMode;
  return {
      {F::projective_line, 1, 0, 1.0, M::none, {}},
      {F::projective_line, 1, 0, 2.0, M::none, {}},
      {F::teardrop, 2, 0, 1.0, M::none, {}},
      {F::teardrop, 3, 0, 1.0, M::none, {}},
      {F::teardrop, 5, 0, 1.0, M::none, {}},
      {F::football, 3, 2, 1.0, M::none, {}},
      {F::football, 5, 2, 1.0, M::none, {}},
      {F::projective_line, 1, 0, 1.0, M::metric_only, {0.2, 0.5, 0.25}},
      {F::teardrop, 2, 0, 1.0, M::prequantum_pair, {0.3, 0.4, 0.15}},
      {F::teardrop, 3, 0, 1.0, M::metric_only, {0.2, 0.5, 0.25}},
  };
}

} // namespace bergorb

#endif // BERGORB_GEOMETRY_HPP
