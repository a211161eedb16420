#ifndef BERGORB_ASYMPTOTICS_HPP
#define BERGORB_ASYMPTOTICS_HPP

// Expansion coefficients, least-squares fits, remainder decay and the
// Gaussian profile of the density near a cone point.

#include "bergorb/bergman.hpp"
#include "bergorb/detail/cyclotomic.hpp"
#include "bergorb/errors.hpp"
#include "bergorb/geometry.hpp"
#include "bergorb/precision.hpp"
#include "bergorb/weights.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>
#include <boost/multiprecision/eigen.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace bergorb {

enum class Regime { kahler, general_metric };

/// Gaussian scale of the cone correction, calibrated on the teardrop m = 2
/// at p = 100 and frozen. The flat orbifold chart gives exactly 1/2.
inline constexpr double kPairingScale = 0.5;

// ---- predicted coefficients ---------------------------------------------------

/// b_0 or b_1 of B_p / p at a smooth point. Kahler: b_0 = sum c_i,
/// b_1 = sum c_i (i + r / 8 pi). General metric: both scaled by omega/Theta
/// and b_1 gains -(1 / 4 pi) Delta log(omega/Theta), Delta >= 0.
template <typename Real>
Real predicted_b(const OrbifoldModel<Real> &model, const WeightSystem &w, const Location<Real> &loc,
                 int level, Regime regime)
{
  if (level != 0 && level != 1)
    throw std::invalid_argument("predicted_b supports levels 0 and 1");
  Real total = 0, first_moment = 0;
  for (const auto &t : w.terms()) {
    const Real c = to_real<Real>(t.coefficient);
    total += c;
    first_moment += c * Real(t.index);
  }
  Real ratio = 1, lap = 0;
  if (regime == Regime::general_metric)
    std::tie(ratio, lap) = model.volume_ratio_and_laplacian(loc);
  if (level == 0)
    return ratio * total;
  const Real r = model.scalar_curvature(loc, regime == Regime::general_metric);
  return ratio * (first_moment + total * (r / (8 * pi<Real>()) - lap / (4 * pi<Real>())));
}

/// Regime matching how the model was built.
template <typename Real>
Regime natural_regime(const OrbifoldModel<Real> &model)
{
  return model.metric_only() ? Regime::general_metric : Regime::kahler;
}

// ---- least squares --------------------------------------------------------------

template <typename Real>
struct LeastSquares {
  std::vector<Real> coefficients;
  std::vector<Real> std_errors;
  std::vector<Real> residuals;
  Real condition = 0; // Frobenius condition number of the column-scaled design
};

/// min ||A c - y|| by Householder QR on the column-equilibrated design.
/// `a` is row-major with `cols` columns.
template <typename Real>
LeastSquares<Real> solve_least_squares(const std::vector<Real> &a, std::size_t cols, const std::vector<Real> &y,
                                       double max_condition = 1e12)
{
  using std::sqrt;
  using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  const std::size_t rows = y.size();
  if (cols == 0 || rows < cols || a.size() != rows * cols)
    throw std::invalid_argument("least squares needs rows >= cols");
  const auto n = static_cast<Eigen::Index>(rows), k = static_cast<Eigen::Index>(cols);
  Matrix design(n, k);
  Vector rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rhs(i) = y[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < k; ++j)
      design(i, j) = a[static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(j)];
  }
  Vector scale(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    scale(j) = design.col(j).norm();
    if (scale(j) == 0)
      throw IllConditioned("design column " + std::to_string(j) + " is zero");
  }
  const Matrix scaled = design * scale.cwiseInverse().asDiagonal();
  const Eigen::HouseholderQR<Matrix> qr(scaled);
  const Matrix r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j)
    if (r(j, j) == 0)
      throw IllConditioned("rank-deficient design");
  const Matrix rinv = r.template triangularView<Eigen::Upper>().solve(Matrix::Identity(k, k));

  LeastSquares<Real> out;
  out.condition = r.norm() * rinv.norm();
  if (!(out.condition <= Real(max_condition)))
    throw IllConditioned("condition number " + std::to_string(to_double(out.condition)) + " exceeds " +
                         std::to_string(max_condition));
  const Vector coef = Vector(qr.solve(rhs)).cwiseQuotient(scale);
  const Vector resid = rhs - design * coef;
  const Real rss = resid.squaredNorm();
  const Real sigma2 = rows > cols ? Real(rss / Real(rows - cols)) : Real(0);
  for (Eigen::Index j = 0; j < k; ++j) {
    out.coefficients.push_back(coef(j));
    out.std_errors.push_back(sqrt(sigma2 * rinv.row(j).squaredNorm()) / scale(j));
  }
  for (Eigen::Index i = 0; i < n; ++i)
    out.residuals.push_back(resid(i));
  return out;
}

// ---- expansion fit --------------------------------------------------------------

template <typename Real>
struct ExpansionFit {
  std::vector<int> ps;
  int order = 0;
  std::vector<Real> coefficients; // b_0 .. b_J
  std::vector<Real> std_errors;
  std::vector<Real> residuals; // per p
  Real condition = 0;

  Real residual_norm() const
  {
    using std::sqrt;
    Real s = 0;
    for (const auto &r : residuals)
      s += r * r;
    return sqrt(s);
  }
};

/// Least-squares fit of value / p^n against sum_{j <= J} b_j p^{-j}.
template <typename Real>
ExpansionFit<Real> fit_expansion(const std::vector<std::pair<int, Real>> &samples, int order,
                                 int n = 1, double max_condition = 1e12)
{
  using std::pow;
  if (order < 0)
    throw std::invalid_argument("expansion order must be non-negative");
  std::vector<int> ps;
  for (const auto &s : samples)
    ps.push_back(s.first);
  std::vector<int> distinct = ps;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<int>(distinct.size()) < order + 3)
    throw DegenerateData("fit of order " + std::to_string(order) + " needs at least " +
                         std::to_string(order + 3) + " distinct p values");
  const std::size_t cols = static_cast<std::size_t>(order + 1);
  std::vector<Real> a, y;
  for (const auto &[p, v] : samples) {
    if (p <= 0)
      throw std::invalid_argument("p must be positive");
    const Real inv = Real(1) / p;
    Real col = 1;
    for (std::size_t j = 0; j < cols; ++j) {
      a.push_back(col);
      col *= inv;
    }
    y.push_back(v / Real(pow(Real(p), n)));
  }
  auto ls = solve_least_squares(a, cols, y, max_condition);
  ExpansionFit<Real> fit;
  fit.ps = std::move(ps);
  fit.order = order;
  fit.coefficients = std::move(ls.coefficients);
  fit.std_errors = std::move(ls.std_errors);
  fit.residuals = std::move(ls.residuals);
  fit.condition = ls.condition;
  return fit;
}

/// About `count` geometrically spaced distinct integers in [lo, hi].
inline std::vector<int> geometric_ps(int lo, int hi, int count)
{
  if (lo < 1 || hi < lo || count < 1)
    throw std::invalid_argument("bad geometric p range");
  std::vector<int> out;
  for (int k = 0; k < count; ++k) {
    const double t = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
    out.push_back(static_cast<int>(std::lround(lo * std::pow(static_cast<double>(hi) / lo, t))));
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Default fit window [max(30, 10 m), 400] with 12 geometric values.
inline std::vector<int> default_fit_window(int m)
{
  return geometric_ps(std::max(30, 10 * m), 400, 12);
}

// ---- decay slope ----------------------------------------------------------------

struct SlopeFit {
  double slope = 0;
  double half_width = 0; // two standard errors
  double intercept = 0;
  std::size_t points = 0;
};

/// Log-log least-squares slope of value against p. Values at or below the
/// noise floor are reported as DegenerateData rather than fitted.
inline SlopeFit decay_slope(const std::vector<std::pair<double, double>> &samples,
                            double noise_floor = 1e-30)
{
  if (samples.size() < 5)
    throw DegenerateData("decay slope needs at least 5 points");
  std::vector<double> lx, ly;
  for (const auto &[p, v] : samples) {
    if (!(p > 0))
      throw DegenerateData("p must be positive");
    if (!(v > noise_floor))
      throw DegenerateData("value " + std::to_string(v) + " at p = " + std::to_string(p) +
                           " is at the noise floor");
    lx.push_back(std::log(p));
    ly.push_back(std::log(v));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0)
    throw DegenerateData("all p values coincide");
  SlopeFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.points = lx.size();
  double rss = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - out.intercept - out.slope * lx[i];
    rss += r * r;
  }
  out.half_width = 2 * std::sqrt(rss / (n - 2) / sxx);
  return out;
}

// ---- remainders -----------------------------------------------------------------

/// Sample points for remainder sweeps, by geodesic distance from a reference
/// pole: `near` points at t = sqrt(p) rho in [0, t_max], then `far` points
/// spread uniformly out to the opposite pole.
struct RemainderGrid {
  int near = 31;
  double t_max = 3.0;
  int far = 40;
  double beta = 0.1; // finite-difference step h = beta / sqrt(p)
};

/// Reference pole: the cone point if there is one, else x = 0.
template <typename Real>
int reference_pole(const OrbifoldModel<Real> &model)
{
  if (model.pole(1).singular())
    return 1;
  return 0;
}

template <typename Real>
std::vector<Real> remainder_radii(const OrbifoldModel<Real> &model, int p, const RemainderGrid &g)
{
  using std::sqrt;
  const int side = reference_pole(model);
  const Real diameter = model.distance_to_pole(model.at_pole(1 - side), side);
  const Real sp = sqrt(Real(p));
  std::vector<Real> out;
  for (int k = 0; k < g.near; ++k) {
    const Real rho = Real(g.t_max) * k / std::max(1, g.near - 1) / sp;
    if (rho <= diameter)
      out.push_back(rho);
  }
  const Real start = Real(g.t_max) / sp;
  for (int k = 1; k <= g.far; ++k) {
    const Real rho = start + (diameter - start) * k / g.far;
    if (rho > start)
      out.push_back(rho);
  }
  return out;
}

/// sum_{j <= N} b_j(x) p^{-j} with predicted b_0, b_1.
template <typename Real>
Real predicted_expansion(const OrbifoldModel<Real> &model, const WeightSystem &w, int p,
                         const Location<Real> &loc, int order)
{
  if (order < 0 || order > 1)
    throw std::invalid_argument("predicted coefficients exist for N <= 1 only");
  const Regime regime = natural_regime(model);
  Real e = predicted_b(model, w, loc, 0, regime);
  if (order >= 1)
    e += predicted_b(model, w, loc, 1, regime) / p;
  return e;
}

/// B_p(x) / p - sum_{j <= N} b_j(x) p^{-j}.
template <typename Real>
Real remainder_at(const BergmanEngine<Real> &engine, const WeightSystem &w, int p,
                  const Location<Real> &loc, int order)
{
  return engine.weighted_density(w, p, loc) / p - predicted_expansion(engine.model(), w, p, loc, order);
}

/// Measured B_p / p and its predicted expansion (or their l-th derivatives in
/// rho) at each grid radius.
template <typename Real>
struct RemainderSweep {
  int p = 0;
  int derivative = 0;
  std::vector<Real> radii;
  std::vector<Real> measured;
  std::vector<Real> model;

  Real sup() const
  {
    using std::abs;
    Real s = 0;
    for (std::size_t i = 0; i < radii.size(); ++i)
      s = std::max(s, Real(abs(measured[i] - model[i])));
    return s;
  }
};

/// Sweep over the grid, rho the geodesic distance from the reference pole.
/// First derivatives are central differences with h = beta / sqrt(p),
/// reflected through the poles where everything is even in rho.
template <typename Real>
RemainderSweep<Real> remainder_sweep(const BergmanEngine<Real> &engine, const WeightSystem &w, int p,
                                     const RemainderGrid &grid, int order, int l, unsigned threads = 1)
{
  using std::sqrt;
  if (l != 0 && l != 1)
    throw std::invalid_argument("derivative order must be 0 or 1");
  const auto &model = engine.model();
  const int side = reference_pole(model);
  const Real diameter = model.distance_to_pole(model.at_pole(1 - side), side);
  auto location = [&](Real rho) {
    if (rho < 0)
      rho = -rho;
    if (rho > diameter)
      rho = 2 * diameter - rho;
    return rho >= diameter ? model.at_pole(1 - side) : model.at_distance(side, rho);
  };
  auto both = [&](const Real &rho) {
    const auto loc = location(rho);
    return std::pair<Real, Real>{engine.weighted_density(w, p, loc) / p,
                                 predicted_expansion(model, w, p, loc, order)};
  };
  RemainderSweep<Real> out;
  out.p = p;
  out.derivative = l;
  out.radii = remainder_radii(model, p, grid);
  out.measured.resize(out.radii.size());
  out.model.resize(out.radii.size());
  const Real h = Real(grid.beta) / sqrt(Real(p));
  parallel_for(out.radii.size(), threads, [&](std::size_t i) {
    if (l == 0) {
      std::tie(out.measured[i], out.model[i]) = both(out.radii[i]);
    } else {
      const auto hi = both(out.radii[i] + h), lo = both(out.radii[i] - h);
      out.measured[i] = (hi.first - lo.first) / (2 * h);
      out.model[i] = (hi.second - lo.second) / (2 * h);
    }
  });
  return out;
}

/// sup over the grid of |d^l/drho^l remainder|.
template <typename Real>
Real derivative_remainder(const BergmanEngine<Real> &engine, const WeightSystem &w, int p,
                          const RemainderGrid &grid, int order, int l, unsigned threads = 1)
{
  return remainder_sweep(engine, w, p, grid, order, l, threads).sup();
}

/// sup over the grid of |remainder| (the l = 0 case).
template <typename Real>
Real sup_remainder(const BergmanEngine<Real> &engine, const WeightSystem &w, int p,
                   const RemainderGrid &grid, int order, unsigned threads = 1)
{
  return derivative_remainder(engine, w, p, grid, order, 0, threads);
}

// ---- singular profile -----------------------------------------------------------

/// Re sum_{u=1}^{m-1} lambda^{u p} exp(-2 pi s (1 - zeta^{-u}) t^2), with
/// lambda = exp(2 pi i a / m), zeta = exp(2 pi i / m), s the pairing scale.
template <typename Real>
Real singular_model(int m, int lambda_exp, int p, const Real &t, const Real &pairing_scale)
{
  using std::cos;
  using std::exp;
  using std::sin;
  if (m < 1)
    throw std::invalid_argument("m must be positive");
  const Real two_pi = 2 * pi<Real>();
  const Real c = two_pi * pairing_scale * t * t;
  Real acc = 0;
  for (int u = 1; u < m; ++u) {
    const std::int64_t phase = detail::mod_floor(std::int64_t(lambda_exp) * u * p, m);
    const Real alpha = two_pi * Real(phase) / m;
    const Real beta = two_pi * Real(u) / m;
    acc += exp(-c * (1 - cos(beta))) * cos(alpha - c * sin(beta));
  }
  return acc;
}

/// Weighted version: sum_i c_i (p + i) / p times the model at power p + i and
/// the same geodesic radius, which is what B_p / p sees.
template <typename Real>
Real weighted_singular_model(const WeightSystem &w, int lambda_exp, int p, const Real &t,
                             const Real &pairing_scale)
{
  using std::sqrt;
  Real acc = 0;
  for (const auto &term : w.terms()) {
    const int q = p + static_cast<int>(term.index);
    const Real tq = t * sqrt(Real(q) / p);
    acc += to_real<Real>(term.coefficient) * Real(q) / p *
           singular_model(w.m(), lambda_exp, q, tq, pairing_scale);
  }
  return acc;
}

template <typename Real>
struct SingularProfile {
  int m = 1;
  int lambda_exp = 0;
  int p = 0;
  Real pairing_scale = 0;
  std::vector<Real> ts;
  std::vector<Real> measured;
  std::vector<Real> model;
  std::vector<Real> residual;

  /// sup |measured - model| / sup |model|.
  Real max_relative_error() const
  {
    using std::abs;
    Real num = 0, den = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      num = std::max(num, Real(abs(residual[i])));
      den = std::max(den, Real(abs(model[i])));
    }
    return num / den;
  }
};

/// Deviation D_p(t) = B_p / p - sum_{j <= N} b_j p^{-j} at geodesic distance
/// t / sqrt(p) from the cone point, against the Gaussian model.
template <typename Real>
SingularProfile<Real> singular_profile(const BergmanEngine<Real> &engine, const WeightSystem &w, int p,
                                       const std::vector<Real> &ts, int order,
                                       const Real &pairing_scale, unsigned threads = 1)
{
  using std::sqrt;
  const auto &model = engine.model();
  if (!model.has_singular_set())
    throw InvalidModel("singular profile needs a cone point");
  const int side = model.pole(1).singular() ? 1 : 0;
  const Pole &cone = model.pole(side);
  if (w.m() != cone.order && w.m() != 1)
    throw MismatchedOrder("weight system order differs from the cone order");
  SingularProfile<Real> out;
  out.m = cone.order;
  out.lambda_exp = cone.lambda_exp;
  out.p = p;
  out.pairing_scale = pairing_scale;
  out.ts = ts;
  out.measured.resize(ts.size());
  out.model.resize(ts.size());
  out.residual.resize(ts.size());
  // Reinterpret a unit system at the cone order so the model sums over u.
  const WeightSystem wm = w.m() == cone.order ? w : WeightSystem(cone.order, w.terms());
  parallel_for(ts.size(), threads, [&](std::size_t i) {
    const auto loc = model.at_distance(side, ts[i] / sqrt(Real(p)));
    out.measured[i] = remainder_at(engine, w, p, loc, order);
    out.model[i] = weighted_singular_model(wm, cone.lambda_exp, p, ts[i], pairing_scale);
    out.residual[i] = out.measured[i] - out.model[i];
  });
  return out;
}

/// Pairing scale minimizing the relative profile error, by Brent's method on
/// [lo, hi].
template <typename Real>
double calibrate_pairing_scale(const BergmanEngine<Real> &engine, int p, const std::vector<Real> &ts,
                               double lo = 0.1, double hi = 2.0)
{
  const auto base = singular_profile(engine, WeightSystem::unit(1), p, ts, 1, Real(1));
  const auto &model = engine.model();
  const int side = model.pole(1).singular() ? 1 : 0;
  const Pole &cone = model.pole(side);
  auto err = [&](double s) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double mv = to_double(singular_model(cone.order, cone.lambda_exp, p, ts[i], Real(s)));
      num = std::max(num, std::abs(to_double(base.measured[i]) - mv));
      den = std::max(den, std::abs(mv));
    }
    return num / den;
  };
  return boost::math::tools::brent_find_minima(err, lo, hi, 50).first;
}

/// max_t |D_a(t) - D_b(t)| for two profiles on the same t grid.
template <typename Real>
Real profile_collapse(const SingularProfile<Real> &a, const SingularProfile<Real> &b)
{
  using std::abs;
  if (a.ts.size() != b.ts.size())
    throw std::invalid_argument("profiles sampled on different grids");
  Real worst = 0;
  for (std::size_t i = 0; i < a.ts.size(); ++i)
    worst = std::max(worst, Real(abs(a.measured[i] - b.measured[i])));
  return worst;
}

// ---- oscillation spectrum ---------------------------------------------------------

template <typename Real>
struct OscillationSpectrum {
  int m = 1;
  std::vector<Real> class_means; // mean remainder over p = u (mod m)
  std::vector<int> class_counts;

  Real separation() const
  {
    Real lo = class_means.front(), hi = class_means.front();
    for (const auto &v : class_means) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi - lo;
  }
};

/// Remainder of order N at a fixed location, averaged per residue class of p.
template <typename Real>
OscillationSpectrum<Real> oscillation_spectrum(const BergmanEngine<Real> &engine, const WeightSystem &w,
                                               const Location<Real> &loc, const std::vector<int> &ps,
                                               int order, int m = 0)
{
  if (m <= 0)
    m = std::max(engine.model().pole(0).order, engine.model().pole(1).order);
  OscillationSpectrum<Real> out;
  out.m = m;
  out.class_means.assign(static_cast<std::size_t>(m), Real(0));
  out.class_counts.assign(static_cast<std::size_t>(m), 0);
  for (int p : ps) {
    const auto u = static_cast<std::size_t>(p % m);
    out.class_means[u] += remainder_at(engine, w, p, loc, order);
    ++out.class_counts[u];
  }
  for (std::size_t u = 0; u < out.class_means.size(); ++u)
    if (out.class_counts[u] > 0)
      out.class_means[u] /= out.class_counts[u];
  return out;
}

// ---- moment diagnostic ------------------------------------------------------------

/// |sum_i c_i i^l lambda^{u i} eta^{p + i}|, lambda = exp(2 pi i a / m). At
/// eta = 1 the sum is decided exactly from the residue moments.
template <typename Real>
Real w_diagnostic(const WeightSystem &w, int l, int u, int p, const Real &eta, int lambda_exp = 1)
{
  using std::cos;
  using std::pow;
  using std::sin;
  using std::sqrt;
  const int m = w.m();
  if (u < 1 || u >= m)
    throw std::invalid_argument("u must lie in 1..m-1");
  if (!(eta > 0 && eta <= 1))
    throw std::invalid_argument("eta must lie in (0, 1]");
  if (eta == 1) {
    // Exact: the character sum vanishes iff its polynomial in a primitive
    // d-th root of unity reduces to zero modulo the cyclotomic polynomial.
    const auto e = detail::mod_floor(std::int64_t(u) * lambda_exp, m);
    const auto g = std::gcd(e, std::int64_t(m));
    const auto d = static_cast<unsigned>(m / g);
    detail::rational_poly coeffs(d, rational(0));
    for (const auto &t : w.terms())
      coeffs[static_cast<std::size_t>(detail::mod_floor(e / g * t.index, d))] +=
          detail::ipow(t.index, l) * t.coefficient;
    if (detail::vanishes_at_primitive_root(coeffs, d))
      return Real(0);
  }
  Real re = 0, im = 0;
  const Real two_pi = 2 * pi<Real>();
  for (const auto &t : w.terms()) {
    const std::int64_t ph = detail::mod_floor(std::int64_t(lambda_exp) * u * t.index, m);
    const Real mag = to_real<Real>(t.coefficient) * Real(pow(Real(t.index), l)) *
                     Real(pow(eta, Real(p + t.index)));
    re += mag * cos(two_pi * Real(ph) / m);
    im += mag * sin(two_pi * Real(ph) / m);
  }
  return sqrt(re * re + im * im);
}

} // namespace bergorb

#endif // BERGORB_ASYMPTOTICS_HPP
