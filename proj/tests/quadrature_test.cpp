#include "bergorb/quadrature.hpp"
#include "test_precision.hpp"

#include <gtest/gtest.h>

using namespace bergorb;

TEST(GaussLegendre, IntegratesPolynomialsExactly)
{
  for (int n : {1, 2, 5, 16, 47}) {
    for (int d = 0; d <= 2 * n - 1; d += 1 + n / 4) {
      const ext_real got = integrate_gl<ext_real>(
          [d](const ext_real &x) { return ext_real(pow(x, d)); }, ext_real(0), ext_real(1), n);
      const ext_real want = ext_real(1) / (d + 1);
      EXPECT_LT(to_double(abs(got - want)), 1e-36) << "n=" << n << " d=" << d;
    }
  }
}

TEST(GaussLegendre, WeightsSumToTwoAndNodesAreSymmetric)
{
  const auto rule = gauss_legendre<ext_real>(33);
  ext_real sum = 0;
  for (std::size_t j = 0; j < rule->size(); ++j) {
    sum += rule->weights[j];
    EXPECT_EQ(rule->nodes[j], -rule->nodes[rule->size() - 1 - j]);
  }
  EXPECT_LT(to_double(abs(sum - 2)), 1e-36);
}

TEST(GaussLegendre, SmoothIntegrandConvergesAtHighPrecision)
{
  const ext_real got = integrate_gl<ext_real>([](const ext_real &x) { return exp(x); }, ext_real(0),
                                              ext_real(1), 40);
  EXPECT_LT(to_double(abs(got - (exp(ext_real(1)) - 1))), 1e-36);
}

TEST(GaussLegendre, LongDoubleRule)
{
  const long double got =
      integrate_gl<long double>([](long double x) { return x * x * x; }, 0.0L, 2.0L, 3);
  EXPECT_NEAR(static_cast<double>(got), 4.0, 1e-15);
}

TEST(GaussLegendre, CacheReturnsSameRule)
{
  EXPECT_EQ(gauss_legendre<ext_real>(20).get(), gauss_legendre<ext_real>(20).get());
  PrecisionScope scope(200);
  EXPECT_NE(gauss_legendre<ext_real>(20).get(), nullptr);
  EXPECT_EQ(gauss_legendre<ext_real>(20)->nodes[0].precision(), ext_real(1).precision());
}
