#ifndef BERGORB_DETAIL_JET_HPP
#define BERGORB_DETAIL_JET_HPP

#include <cmath>

namespace bergorb {

/// Value with first and second derivative in one real variable.
template <typename Real>
struct Jet {
  Real v = 0, d1 = 0, d2 = 0;

  static Jet constant(const Real &c) { return {c, Real(0), Real(0)}; }
  static Jet variable(const Real &x) { return {x, Real(1), Real(0)}; }

  friend Jet operator+(const Jet &a, const Jet &b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
  friend Jet operator-(const Jet &a, const Jet &b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }
  friend Jet operator*(const Jet &a, const Jet &b)
  {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2 * a.d1 * b.d1 + a.v * b.d2};
  }
  friend Jet operator*(const Real &c, const Jet &a) { return {c * a.v, c * a.d1, c * a.d2}; }
  friend Jet operator+(const Real &c, const Jet &a) { return {c + a.v, a.d1, a.d2}; }
};

template <typename Real>
Jet<Real> exp(const Jet<Real> &a)
{
  using std::exp;
  const Real e = exp(a.v);
  return {e, e * a.d1, e * (a.d2 + a.d1 * a.d1)};
}

/// Rescales derivatives for a change of variable x = scale * y.
template <typename Real>
Jet<Real> chain_linear(const Jet<Real> &a, const Real &dy_dx)
{
  return {a.v, a.d1 * dy_dx, a.d2 * dy_dx * dy_dx};
}

} // namespace bergorb

#endif // BERGORB_DETAIL_JET_HPP
