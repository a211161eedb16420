#ifndef BERGORB_WEIGHTS_HPP
#define BERGORB_WEIGHTS_HPP

// Weight systems {c_i} whose power moments are equidistributed over the
// residue classes mod m, in exact rational arithmetic.

#include "bergorb/detail/cyclotomic.hpp"
#include "bergorb/detail/simplex.hpp"
#include "bergorb/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <climits>
#include <limits>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bergorb {

using rational = detail::rational;
using integer = detail::integer;

/// Order sentinel: admissible at no order (fails already at k = 0).
inline constexpr int kOrderNone = -1;
/// Order sentinel: m = 1, every order holds.
inline constexpr int kOrderUnbounded = INT_MAX;

struct WeightTerm {
  std::int64_t index;
  rational coefficient;

  friend bool operator==(const WeightTerm &, const WeightTerm &) = default;
};

class WeightSystem;
inline bool check_admissible(const WeightSystem &w, int max_k);

/// Positive rational weights c_i on non-negative indices, with orbifold order m.
///
/// Terms are kept sorted by index; the admissibility order is computed on
/// construction, so it is always consistent with the coefficients.
class WeightSystem {
 public:
  WeightSystem(int m, std::vector<WeightTerm> terms) : m_(m), terms_(std::move(terms))
  {
    if (m_ < 1)
      throw InvalidWeightSystem("orbifold order m must be positive");
    if (terms_.empty())
      throw InvalidWeightSystem("support must be non-empty");
    std::sort(terms_.begin(), terms_.end(),
              [](const WeightTerm &a, const WeightTerm &b) { return a.index < b.index; });
    for (std::size_t k = 0; k < terms_.size(); ++k) {
      if (terms_[k].index < 0)
        throw InvalidWeightSystem("indices must be non-negative");
      if (terms_[k].coefficient <= 0)
        throw InvalidWeightSystem("coefficients must be positive");
      if (k > 0 && terms_[k].index == terms_[k - 1].index)
        throw InvalidWeightSystem("duplicate index " + std::to_string(terms_[k].index));
    }
    order_ = compute_order();
  }

  /// Convenience for integer coefficients: {{index, c}, ...}.
  static WeightSystem from_integers(int m, std::initializer_list<std::pair<std::int64_t, long>> pairs)
  {
    std::vector<WeightTerm> t;
    for (auto [i, c] : pairs)
      t.push_back({i, rational(c)});
    return WeightSystem(m, std::move(t));
  }

  /// The unit weight {c_0 = 1}: B^orb_p reduces to P_p.
  static WeightSystem unit(int m) { return from_integers(m, {{0, 1}}); }

  int m() const { return m_; }
  const std::vector<WeightTerm> &terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }

  /// Largest K with check_admissible(*this, K); kOrderNone or kOrderUnbounded sentinels.
  int order() const { return order_; }

  rational total() const
  {
    rational s = 0;
    for (const auto &t : terms_)
      s += t.coefficient;
    return s;
  }

  std::int64_t max_index() const { return terms_.back().index; }

  /// Short label such as "c2=1,c3=2,c4=1".
  std::string label() const
  {
    std::ostringstream os;
    for (std::size_t k = 0; k < terms_.size(); ++k) {
      if (k)
        os << ',';
      os << 'c' << terms_[k].index << '=' << terms_[k].coefficient.str();
    }
    return os.str();
  }

  friend bool operator==(const WeightSystem &a, const WeightSystem &b)
  {
    return a.m_ == b.m_ && a.terms_ == b.terms_;
  }

 private:
  int compute_order() const
  {
    if (m_ == 1)
      return kOrderUnbounded;
    // Positivity plus a Vandermonde argument bounds the order by size - 2.
    int k = kOrderNone;
    const int cap = static_cast<int>(terms_.size());
    while (k + 1 <= cap && check_admissible(*this, k + 1))
      ++k;
    return k;
  }

  int m_;
  std::vector<WeightTerm> terms_;
  int order_ = kOrderNone;
};

namespace detail {

inline std::int64_t mod_floor(std::int64_t a, std::int64_t m)
{
  std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

inline rational ipow(std::int64_t base, int k)
{
  integer r = 1;
  for (int j = 0; j < k; ++j)
    r *= base;
  return rational(r);
}

} // namespace detail

/// Sum of i^k c_i over the indices i congruent to u mod m.
inline rational residue_moment(const WeightSystem &w, int k, int u)
{
  if (k < 0 || u < 0 || u >= w.m())
    throw std::invalid_argument("residue_moment: need k >= 0 and 0 <= u < m");
  rational s = 0;
  for (const auto &t : w.terms())
    if (detail::mod_floor(t.index, w.m()) == u)
      s += detail::ipow(t.index, k) * t.coefficient;
  return s;
}

/// Exact test of (1/m) sum_i i^k c_i == sum_{i = u mod m} i^k c_i for all u < m, k <= max_k.
inline bool check_admissible(const WeightSystem &w, int max_k)
{
  const int m = w.m();
  if (max_k < 0 || m == 1)
    return true;
  std::vector<rational> power(w.size(), rational(1));
  std::vector<rational> per_class(static_cast<std::size_t>(m));
  for (int k = 0; k <= max_k; ++k) {
    std::fill(per_class.begin(), per_class.end(), rational(0));
    rational total = 0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const auto &t = w.terms()[j];
      const rational v = power[j] * t.coefficient;
      per_class[static_cast<std::size_t>(detail::mod_floor(t.index, m))] += v;
      total += v;
      power[j] *= t.index;
    }
    const rational share = total / m;
    for (const auto &c : per_class)
      if (c != share)
        return false;
  }
  return true;
}

/// Closed index interval [lo, hi].
struct IndexWindow {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

namespace detail {

// Rows: for k <= K and u = 1..m-1, sum_{i=u} i^k c_i - sum_{i=0} i^k c_i over the given columns.
inline std::vector<std::vector<rational>> admissibility_rows(int m, int max_k,
                                                             const std::vector<std::int64_t> &cols)
{
  std::vector<std::vector<rational>> rows;
  for (int k = 0; k <= max_k; ++k) {
    for (int u = 1; u < m; ++u) {
      std::vector<rational> row(cols.size(), rational(0));
      for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto r = mod_floor(cols[j], m);
        if (r == u)
          row[j] = ipow(cols[j], k);
        else if (r == 0)
          row[j] = -ipow(cols[j], k);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// Solves min sum(y) s.t. rows * c = 0 with c_j = 1 + y_j for pinned columns and c_j = y_j otherwise.
inline std::optional<std::vector<rational>> pinned_lp(int m, int max_k,
                                                      const std::vector<std::int64_t> &cols,
                                                      std::size_t pinned)
{
  auto a = admissibility_rows(m, max_k, cols);
  std::vector<rational> b(a.size(), rational(0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < pinned; ++j)
      b[i] -= a[i][j];
  std::vector<rational> cost(cols.size(), rational(1));
  auto y = ExactSimplex::solve(std::move(a), std::move(b), cost);
  if (!y)
    return std::nullopt;
  for (std::size_t j = 0; j < pinned; ++j)
    (*y)[j] += 1;
  return y;
}

} // namespace detail

/// Finds a positive admissible weight system of order >= K supported in the window.
///
/// Picks the lexicographically smallest feasible support (as a sorted index
/// list), then the minimal-sum solution with every coefficient >= 1, which
/// leaves the smallest coefficient equal to 1.
inline WeightSystem solve_weights(int m, int max_k, IndexWindow window)
{
  if (m < 1 || max_k < 0 || window.lo < 0 || window.hi < window.lo)
    throw std::invalid_argument("solve_weights: need m >= 1, K >= 0, 0 <= lo <= hi");

  std::vector<std::int64_t> prefix;
  auto exact_support = [&](const std::vector<std::int64_t> &s) {
    return detail::pinned_lp(m, max_k, s, s.size());
  };
  auto extendable = [&](std::int64_t next) {
    std::vector<std::int64_t> cols = prefix;
    cols.push_back(next);
    const std::size_t pinned = cols.size();
    for (std::int64_t i = next + 1; i <= window.hi; ++i)
      cols.push_back(i);
    return detail::pinned_lp(m, max_k, cols, pinned).has_value();
  };

  for (;;) {
    if (!prefix.empty()) {
      if (auto c = exact_support(prefix)) {
        std::vector<WeightTerm> terms;
        for (std::size_t j = 0; j < prefix.size(); ++j)
          terms.push_back({prefix[j], (*c)[j]});
        return WeightSystem(m, std::move(terms));
      }
    }
    const std::int64_t start = prefix.empty() ? window.lo : prefix.back() + 1;
    bool grown = false;
    for (std::int64_t a = start; a <= window.hi; ++a) {
      if (extendable(a)) {
        prefix.push_back(a);
        grown = true;
        break;
      }
    }
    if (!grown) {
      std::ostringstream os;
      os << "no positive solution for m=" << m << ", K=" << max_k << " in window [" << window.lo
         << ", " << window.hi << "]";
      throw Infeasible(os.str());
    }
  }
}

/// Discrete convolution (w1 * w2)_j = sum_i c_i^(1) c_{j-i}^(2).
inline WeightSystem convolve(const WeightSystem &w1, const WeightSystem &w2)
{
  if (w1.m() != w2.m())
    throw MismatchedOrder("convolve: m=" + std::to_string(w1.m()) + " vs m=" +
                          std::to_string(w2.m()));
  std::vector<WeightTerm> out;
  for (const auto &a : w1.terms())
    for (const auto &b : w2.terms())
      out.push_back({a.index + b.index, a.coefficient * b.coefficient});
  std::sort(out.begin(), out.end(),
            [](const WeightTerm &x, const WeightTerm &y) { return x.index < y.index; });
  std::vector<WeightTerm> merged;
  for (auto &t : out) {
    if (!merged.empty() && merged.back().index == t.index)
      merged.back().coefficient += t.coefficient;
    else
      merged.push_back(std::move(t));
  }
  return WeightSystem(w1.m(), std::move(merged));
}

/// Infinite vanishing order (the polynomial is identically zero).
inline constexpr long kInfiniteRootOrder = LONG_MAX;

/// Order of vanishing at eta = 1 of eta -> sum_i c_i i^l lambda^{u i} eta^i,
/// lambda = exp(2 pi sqrt(-1) lambda_exp / m), decided exactly in Q(lambda^u).
inline long root_order_at_one(const WeightSystem &w, int l, int u, int lambda_exp)
{
  const int m = w.m();
  if (m == 1)
    throw NoNontrivialCharacter("m = 1 has no nontrivial character");
  if (l < 0 || u < 1 || u >= m)
    throw std::invalid_argument("root_order_at_one: need l >= 0 and 1 <= u <= m-1");
  if (std::gcd(lambda_exp, m) != 1)
    throw std::invalid_argument("root_order_at_one: lambda_exp must be coprime to m");

  const auto e = detail::mod_floor(static_cast<std::int64_t>(u) * lambda_exp, m);
  const auto g = std::gcd(e, static_cast<std::int64_t>(m));
  const auto d = static_cast<unsigned>(m / g);
  const auto step = e / g; // omega = zeta_d^step, step coprime to d

  std::vector<rational> base(w.size());
  for (std::size_t j = 0; j < w.size(); ++j)
    base[j] = detail::ipow(w.terms()[j].index, l) * w.terms()[j].coefficient;

  const std::int64_t degree = w.max_index();
  for (std::int64_t order = 0; order <= degree; ++order) {
    // (1/order!) d^order/d eta^order at eta = 1: sum_i c_i i^l C(i, order) omega^i.
    detail::rational_poly coeffs(d, rational(0));
    for (std::size_t j = 0; j < w.size(); ++j) {
      const std::int64_t i = w.terms()[j].index;
      if (i < order)
        continue;
      integer binom = 1;
      for (std::int64_t q = 0; q < order; ++q)
        binom = binom * (i - q) / (q + 1);
      const auto r = static_cast<std::size_t>(detail::mod_floor(step * i, d));
      coeffs[r] += base[j] * rational(binom);
    }
    if (!detail::vanishes_at_primitive_root(coeffs, d))
      return static_cast<long>(order);
  }
  return kInfiniteRootOrder;
}

// Serialization record: {"m": .., "K": .., "pairs": [[i, num, den], ...]}.
// K is a non-negative integer, "unbounded" (m = 1) or null (no order holds).
// Numerators and denominators are JSON integers when they fit in int64,
// decimal strings otherwise.

namespace detail {

inline nlohmann::json integer_to_json(const integer &z)
{
  if (z >= std::numeric_limits<std::int64_t>::min() && z <= std::numeric_limits<std::int64_t>::max())
    return static_cast<std::int64_t>(z);
  return z.str();
}

inline integer integer_from_json(const nlohmann::json &j)
{
  if (j.is_number_integer())
    return integer(j.get<std::int64_t>());
  if (j.is_string())
    return integer(j.get<std::string>());
  throw InvalidWeightSystem("expected integer or decimal string, got " + j.dump());
}

} // namespace detail

inline nlohmann::json to_json(const WeightSystem &w)
{
  nlohmann::json j;
  j["m"] = w.m();
  if (w.order() == kOrderUnbounded)
    j["K"] = "unbounded";
  else if (w.order() == kOrderNone)
    j["K"] = nullptr;
  else
    j["K"] = w.order();
  j["pairs"] = nlohmann::json::array();
  for (const auto &t : w.terms())
    j["pairs"].push_back({t.index, detail::integer_to_json(numerator(t.coefficient)),
                          detail::integer_to_json(denominator(t.coefficient))});
  return j;
}

/// Parses a serialization record; a present K must match the recomputed order.
inline WeightSystem weights_from_json(const nlohmann::json &j)
{
  if (!j.is_object() || !j.contains("m") || !j.contains("pairs"))
    throw InvalidWeightSystem("record needs fields m and pairs");
  std::vector<WeightTerm> terms;
  for (const auto &p : j.at("pairs")) {
    if (!p.is_array() || (p.size() != 3 && p.size() != 2))
      throw InvalidWeightSystem("pair must be [i, numerator, denominator]");
    const integer num = detail::integer_from_json(p[1]);
    const integer den = p.size() == 3 ? detail::integer_from_json(p[2]) : integer(1);
    if (den == 0)
      throw InvalidWeightSystem("zero denominator");
    terms.push_back({p[0].get<std::int64_t>(), rational(num, den)});
  }
  WeightSystem w(j.at("m").get<int>(), std::move(terms));
  if (j.contains("K")) {
    const auto &k = j.at("K");
    int declared = k.is_null() ? kOrderNone
                   : k.is_string() && k.get<std::string>() == "unbounded" ? kOrderUnbounded
                   : k.is_number_integer() ? k.get<int>()
                                           : throw InvalidWeightSystem("bad K field " + k.dump());
    if (declared != w.order())
      throw InvalidWeightSystem("declared K does not match the weights (declared " + k.dump() +
                                ")");
  }
  return w;
}

} // namespace bergorb

#endif // BERGORB_WEIGHTS_HPP
