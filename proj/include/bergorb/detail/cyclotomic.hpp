#ifndef BERGORB_DETAIL_CYCLOTOMIC_HPP
#define BERGORB_DETAIL_CYCLOTOMIC_HPP

#include <boost/multiprecision/gmp.hpp>

#include <cstddef>
#include <map>
#include <mutex>
#include <vector>

namespace bergorb::detail {

using rational = boost::multiprecision::mpq_rational;
using integer = boost::multiprecision::mpz_int;

/// Dense polynomial, coefficient of x^k at index k.
using rational_poly = std::vector<rational>;

inline void trim(rational_poly &p)
{
  while (!p.empty() && p.back() == 0)
    p.pop_back();
}

/// Remainder of a modulo a monic b.
inline rational_poly poly_mod(rational_poly a, const rational_poly &b)
{
  trim(a);
  const std::size_t db = b.size() - 1;
  while (a.size() > db) {
    const rational lead = a.back();
    const std::size_t shift = a.size() - 1 - db;
    for (std::size_t k = 0; k <= db; ++k)
      a[shift + k] -= lead * b[k];
    trim(a);
  }
  return a;
}

/// Exact quotient of a by monic b (b must divide a).
inline rational_poly poly_div_exact(rational_poly a, const rational_poly &b)
{
  trim(a);
  const std::size_t db = b.size() - 1;
  rational_poly q(a.size() - db, rational(0));
  while (a.size() > db && !a.empty()) {
    const rational lead = a.back();
    const std::size_t shift = a.size() - 1 - db;
    q[shift] = lead;
    for (std::size_t k = 0; k <= db; ++k)
      a[shift + k] -= lead * b[k];
    trim(a);
  }
  return q;
}

/// d-th cyclotomic polynomial, from x^d - 1 = prod_{e | d} Phi_e(x).
inline const rational_poly &cyclotomic(unsigned d)
{
  static std::mutex mutex;
  static std::map<unsigned, rational_poly> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(d); it != cache.end())
    return it->second;

  // Build the chain of divisors bottom-up without recursive locking.
  std::vector<unsigned> divisors;
  for (unsigned e = 1; e <= d; ++e)
    if (d % e == 0)
      divisors.push_back(e);
  for (unsigned e : divisors) {
    if (cache.count(e))
      continue;
    rational_poly poly(e + 1, rational(0));
    poly[0] = -1;
    poly[e] = 1;
    for (unsigned f = 1; f < e; ++f)
      if (e % f == 0)
        poly = poly_div_exact(poly, cache.at(f));
    cache.emplace(e, std::move(poly));
  }
  return cache.at(d);
}

/// Tests whether sum_r coeffs[r] * w^r vanishes for a primitive d-th root of unity w.
inline bool vanishes_at_primitive_root(const rational_poly &coeffs, unsigned d)
{
  rational_poly rem = poly_mod(coeffs, cyclotomic(d));
  return rem.empty();
}

} // namespace bergorb::detail

#endif // BERGORB_DETAIL_CYCLOTOMIC_HPP
