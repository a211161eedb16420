#ifndef BERGORB_QUADRATURE_HPP
#define BERGORB_QUADRATURE_HPP

#include "bergorb/precision.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <type_traits>
#include <utility>
#include <vector>

namespace bergorb {

/// n-point Gauss-Legendre rule on [-1, 1].
template <typename Real>
struct GaussLegendreRule {
  std::vector<Real> nodes;
  std::vector<Real> weights;

  std::size_t size() const { return nodes.size(); }
};

namespace detail {

// P_n(x) and P_n'(x) by the three-term recurrence.
template <typename T>
std::pair<T, T> legendre_with_derivative(int n, const T &x)
{
  T p0 = 1, p1 = x;
  for (int k = 2; k <= n; ++k) {
    T p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = std::move(p1);
    p1 = std::move(p2);
  }
  T dp = n * (x * p1 - p0) / (x * x - 1);
  return {p1, dp};
}

template <typename Real>
GaussLegendreRule<Real> build_gauss_legendre(int n)
{
  using std::abs;
  GaussLegendreRule<Real> rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const Real tol = epsilon<Real>() * 4;
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Long double Newton first, then polish at working precision.
    long double z = std::cos(std::numbers::pi_v<long double> * (i + 0.75L) / (n + 0.5L));
    for (int it = 0; it < 100; ++it) {
      auto [p, dp] = legendre_with_derivative<long double>(n, z);
      const long double dz = p / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-18L)
        break;
    }
    Real x = static_cast<Real>(z);
    Real dp_final;
    for (int it = 0; it < 20; ++it) {
      auto [p, dp] = legendre_with_derivative<Real>(n, x);
      const Real dx = p / dp;
      x -= dx;
      dp_final = dp;
      if (abs(dx) <= tol)
        break;
    }
    dp_final = legendre_with_derivative<Real>(n, x).second;
    const Real w = Real(2) / ((1 - x * x) * dp_final * dp_final);
    rule.nodes[static_cast<std::size_t>(i)] = -x;
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1)
    rule.nodes[static_cast<std::size_t>(n / 2)] = 0;
  return rule;
}

} // namespace detail

/// Cached Gauss-Legendre rule; thread-safe. Rules for ext_real are keyed by
/// the working precision at the time of the call.
template <typename Real>
std::shared_ptr<const GaussLegendreRule<Real>> gauss_legendre(int n)
{
  static std::mutex mutex;
  static std::map<std::pair<int, unsigned>, std::shared_ptr<const GaussLegendreRule<Real>>> cache;
  unsigned bits = 0;
  if constexpr (!std::is_floating_point_v<Real>)
    bits = working_precision_bits();
  const auto key = std::make_pair(n, bits);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end())
      return it->second;
  }
  auto rule = std::make_shared<const GaussLegendreRule<Real>>(detail::build_gauss_legendre<Real>(n));
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(rule)).first->second;
}

/// Integral of f over [a, b] with an n-point Gauss-Legendre rule.
template <typename Real, typename F>
Real integrate_gl(F &&f, const Real &a, const Real &b, int n)
{
  const auto rule = gauss_legendre<Real>(n);
  const Real half = (b - a) / 2, mid = (b + a) / 2;
  Real acc = 0;
  for (std::size_t j = 0; j < rule->size(); ++j)
    acc += rule->weights[j] * f(mid + half * rule->nodes[j]);
  return acc * half;
}

} // namespace bergorb

#endif // BERGORB_QUADRATURE_HPP
