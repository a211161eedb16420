#ifndef BERGORB_PRECISION_HPP
#define BERGORB_PRECISION_HPP

#include <boost/multiprecision/mpfr.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <type_traits>

namespace bergorb {

/// Runtime-precision MPFR float without expression templates.
using ext_real = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>,
                                               boost::multiprecision::et_off>;

inline constexpr unsigned kDefaultPrecisionBits = 128;

inline unsigned bits_to_digits10(unsigned bits)
{
  return static_cast<unsigned>(std::ceil(bits * 0.30102999566398120)) + 1;
}

/// Sets the process-wide working precision of ext_real.
///
/// The MPFR default precision is a global; set it once before spawning
/// workers and never concurrently with arithmetic.
inline void set_working_precision(unsigned bits)
{
  ext_real::default_precision(bits_to_digits10(bits));
}

/// Bits carried by a freshly constructed ext_real.
inline unsigned working_precision_bits()
{
  const ext_real probe;
  return static_cast<unsigned>(mpfr_get_prec(probe.backend().data()));
}

class PrecisionScope {
 public:
  explicit PrecisionScope(unsigned bits) : saved_(ext_real::default_precision())
  {
    set_working_precision(bits);
  }
  ~PrecisionScope() { ext_real::default_precision(saved_); }
  PrecisionScope(const PrecisionScope &) = delete;
  PrecisionScope &operator=(const PrecisionScope &) = delete;

 private:
  unsigned saved_;
};

template <typename Real>
Real pi()
{
  if constexpr (std::is_floating_point_v<Real>)
    return std::numbers::pi_v<Real>;
  else
    return acos(Real(-1));
}

/// Machine epsilon of the working type (runtime for MPFR).
template <typename Real>
Real epsilon()
{
  if constexpr (std::is_floating_point_v<Real>) {
    return std::numeric_limits<Real>::epsilon();
  } else {
    using std::ldexp;
    return ldexp(Real(1), 1 - static_cast<int>(working_precision_bits()));
  }
}

/// Significant bits of the working type.
template <typename Real>
int mantissa_bits()
{
  if constexpr (std::is_floating_point_v<Real>)
    return std::numeric_limits<Real>::digits;
  else
    return static_cast<int>(working_precision_bits());
}

template <typename Real>
double to_double(const Real &x)
{
  return static_cast<double>(x);
}

/// log(sum_i exp(v_i)) with max shift; -inf entries are ignored.
template <typename Real>
Real log_sum_exp(std::span<const Real> v)
{
  using std::exp;
  using std::log;
  using std::isinf;
  Real top = -std::numeric_limits<double>::infinity();
  for (const auto &x : v)
    if (x > top)
      top = x;
  if (isinf(top))
    return top;
  Real acc = 0;
  for (const auto &x : v)
    if (!isinf(x))
      acc += exp(x - top);
  return top + log(acc);
}

} // namespace bergorb

#endif // BERGORB_PRECISION_HPP
