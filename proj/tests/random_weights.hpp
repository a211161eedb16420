#ifndef BERGORB_TESTS_RANDOM_WEIGHTS_HPP
#define BERGORB_TESTS_RANDOM_WEIGHTS_HPP

// Hand-rolled generators for weight-system property tests.

#include "bergorb/weights.hpp"

#include <map>
#include <random>
#include <vector>

namespace bergorb::testing {

inline rational random_positive_rational(std::mt19937_64 &rng)
{
  std::uniform_int_distribution<long> num(1, 9), den(1, 5);
  return rational(num(rng), den(rng));
}

/// Arbitrary positive weights on up to max_support indices in [0, max_index].
inline WeightSystem random_weights(std::mt19937_64 &rng, int m, int max_support, int max_index)
{
  std::uniform_int_distribution<int> size(1, max_support), idx(0, max_index);
  std::map<std::int64_t, rational> terms;
  const int n = size(rng);
  while (static_cast<int>(terms.size()) < n)
    terms[idx(rng)] = random_positive_rational(rng);
  std::vector<WeightTerm> t;
  for (auto &[i, c] : terms)
    t.push_back({i, c});
  return WeightSystem(m, std::move(t));
}

/// Weights with equal mass in every residue class mod m (order >= 0).
inline WeightSystem random_balanced_weights(std::mt19937_64 &rng, int m, int per_class,
                                            int max_index)
{
  std::uniform_int_distribution<int> count(1, per_class);
  std::map<std::int64_t, rational> terms;
  for (int u = 0; u < m; ++u) {
    const int n = count(rng);
    std::uniform_int_distribution<int> slot(0, max_index / m);
    std::map<std::int64_t, rational> cls;
    while (static_cast<int>(cls.size()) < n)
      cls[static_cast<std::int64_t>(slot(rng)) * m + u] = random_positive_rational(rng);
    rational mass = 0;
    for (auto &[i, c] : cls)
      mass += c;
    for (auto &[i, c] : cls)
      terms[i] = c / mass;
  }
  std::vector<WeightTerm> t;
  for (auto &[i, c] : terms)
    t.push_back({i, c});
  return WeightSystem(m, std::move(t));
}

/// Convolution of `factors` balanced systems: order >= factors - 1.
inline WeightSystem random_admissible(std::mt19937_64 &rng, int m, int factors, int per_class,
                                      int max_index)
{
  WeightSystem w = random_balanced_weights(rng, m, per_class, max_index);
  for (int f = 1; f < factors; ++f)
    w = convolve(w, random_balanced_weights(rng, m, per_class, max_index));
  return w;
}

} // namespace bergorb::testing

#endif // BERGORB_TESTS_RANDOM_WEIGHTS_HPP
