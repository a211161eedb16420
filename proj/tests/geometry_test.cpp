#include "bergorb/geometry.hpp"
#include "test_precision.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bergorb;
using R = ext_real;

namespace {

double d(const R &x) { return to_double(x); }

std::vector<OrbifoldModel<R>> shipped_models()
{
  std::vector<OrbifoldModel<R>> out;
  out.push_back(make_projective_line<R>(1.0));
  out.push_back(make_projective_line<R>(2.0));
  out.push_back(make_teardrop<R>(2));
  out.push_back(make_teardrop<R>(3));
  out.push_back(make_football<R>(3, 2));
  out.push_back(make_football<R>(5, 2));
  out.push_back(perturb_metric(make_projective_line<R>(1.0), PerturbationMode::metric_only,
                               Bump{0.3, 0.4, 0.15}));
  out.push_back(perturb_metric(make_teardrop<R>(2), PerturbationMode::prequantum_pair,
                               Bump{0.25, 0.5, 0.2}));
  return out;
}

// Gauss curvature of the conformal metric lambda |dz|^2 on a chart, from
// finite differences of log lambda along the real axis.
R chart_curvature_fd(const OrbifoldModel<R> &model, int chart, const R &r)
{
  const int m = model.pole(chart).order;
  auto log_lambda = [&](const R &rr) {
    PointRef<R> z{chart, rr, R(0), false};
    const auto loc = model.locate(z);
    return R(log(m * m * model.profile(loc).v / (pi<R>() * rr * rr)));
  };
  const R h = r * R(1e-8);
  const R lm = log_lambda(r - h), l0 = log_lambda(r), lp = log_lambda(r + h);
  const R second = (lp - 2 * l0 + lm) / (h * h);
  const R first = (lp - lm) / (2 * h);
  const R lambda = exp(l0);
  return -(second + first / r) / (2 * lambda);
}

} // namespace

TEST(ProjectiveLine, ScalarCurvatureFromVolume)
{
  const auto p1 = make_projective_line<R>(1.0);
  const auto p2 = make_projective_line<R>(2.0);
  for (double t : {0.01, 0.3, 0.5, 0.77, 0.999}) {
    EXPECT_NEAR(d(p1.scalar_curvature(p1.at_moment(R(t)))), 8 * M_PI, 1e-8);
    EXPECT_NEAR(d(p2.scalar_curvature(p2.at_moment(R(2 * t)))), 4 * M_PI, 1e-8);
  }
  EXPECT_THROW(make_projective_line<R>(0.0), InvalidModel);
}

TEST(AllModels, PrequantumResidual)
{
  for (const auto &model : shipped_models()) {
    const R res = model.prequantum_residual(1000);
    EXPECT_LT(d(res), 1e-10) << model.descriptor().name();
    if (model.descriptor().family == Family::projective_line &&
        model.descriptor().mode == PerturbationMode::none) {
      EXPECT_LT(d(res), 1e-12);
    }
  }
}

TEST(AllModels, GaussBonnet)
{
  for (const auto &model : shipped_models()) {
    const R want = 2 * pi<R>() * model.euler_characteristic();
    EXPECT_LT(d(abs(model.gauss_bonnet_integral() / want - 1)), 1e-6) << model.descriptor().name();
  }
}

TEST(Teardrop, Construction)
{
  const auto t2 = make_teardrop<R>(2);
  EXPECT_EQ(t2.pole(0).order, 1);
  EXPECT_EQ(t2.pole(1).order, 2);
  EXPECT_EQ(std::gcd(t2.pole(1).lambda_exp, 2), 1);
  EXPECT_TRUE(t2.has_singular_set());
  const R vol = integrate_gl<R>([](const R &) { return R(1); }, R(0), t2.volume(), 4);
  EXPECT_NEAR(d(vol), 0.5, 1e-30);
  // Smoothness conditions at both poles.
  EXPECT_NEAR(d(t2.profile(t2.at_pole(0)).d1), 1.0, 1e-30);
  EXPECT_NEAR(d(t2.profile(t2.at_pole(1)).d1), -0.5, 1e-30);
  EXPECT_THROW(make_teardrop<R>(1), InvalidModel);
}

TEST(Teardrop, CurvatureMatchesFiniteDifferenceOracle)
{
  for (int m : {2, 3}) {
    const auto t = make_teardrop<R>(m);
    for (int chart = 0; chart < 2; ++chart) {
      for (double frac : {0.3, 0.5, 0.7}) {
        const auto loc = t.at_moment(t.volume() * R(chart == 0 ? frac * 0.9 : 1 - frac * 0.9));
        const auto z = t.chart_point(loc, chart);
        const R r = sqrt(z.abs2());
        const R fd = 2 * chart_curvature_fd(t, chart, r);
        EXPECT_NEAR(d(fd), d(t.scalar_curvature(loc)), 1e-6 * std::abs(d(fd)) + 1e-9)
            << "m=" << m << " chart=" << chart;
      }
    }
  }
}

TEST(Football, CharacterValidation)
{
  EXPECT_THROW(make_football<R>(2, 0), FiberActionNotFaithful);
  EXPECT_THROW(make_football<R>(2, 1), FiberActionNotFaithful);
  EXPECT_THROW(make_football<R>(4, 3), FiberActionNotFaithful);
  const auto f3 = make_football<R>(3, 2);
  EXPECT_EQ(f3.pole(0).lambda_exp, 2);
  EXPECT_EQ(f3.pole(1).lambda_exp, 2);
  const auto f5 = make_football<R>(5, 2);
  EXPECT_EQ(f5.pole(0).lambda_exp, 2);
  EXPECT_EQ(f5.pole(1).lambda_exp, 4);
  EXPECT_NO_THROW(make_football<R>(1, 0));
}

TEST(Football, DistanceMatchesRoundSphereCover)
{
  // The football is a quotient of a round sphere of area 1, on which the
  // polar angle satisfies m x = (1 - cos theta) / 2.
  const auto f = make_football<R>(3, 2);
  const R radius = 1 / sqrt(4 * pi<R>());
  for (double frac : {1e-9, 0.01, 0.2, 0.5, 0.8, 0.999}) {
    const auto loc = f.at_moment(f.volume() * R(frac));
    const R want = radius * acos(1 - 2 * 3 * loc.x);
    EXPECT_NEAR(d(f.distance_to_pole(loc, 0)), d(want), 1e-25) << frac;
    EXPECT_NEAR(d(f.distance_to_singular(loc)), d(std::min(want, radius * pi<R>() - want)), 1e-25);
  }
}

TEST(Distance, SentinelsAndRefinement)
{
  const auto p1 = make_projective_line<R>(1.0);
  EXPECT_TRUE(isinf(p1.distance_to_singular(p1.at_moment(R(0.3)))));
  const auto t = make_teardrop<R>(2);
  EXPECT_EQ(t.distance_to_singular(t.at_pole(1)), 0);
  const auto antipode = t.at_pole(0);
  const R coarse = t.distance_to_pole(antipode, 1, 96);
  const R fine = t.distance_to_pole(antipode, 1, 192);
  EXPECT_GT(coarse, 0);
  EXPECT_LT(d(abs(coarse - fine)), 1e-8);
  EXPECT_LT(d(abs(coarse - fine)), 1e-30);
}

TEST(Distance, InverseRoundTrip)
{
  const auto t = make_teardrop<R>(3);
  for (double rho : {1e-12, 1e-3, 0.05, 0.2}) {
    const auto loc = t.at_distance(1, R(rho));
    EXPECT_NEAR(d(t.distance_to_pole(loc, 1) / R(rho)), 1.0, 1e-30);
  }
  const auto pert = perturb_metric(make_teardrop<R>(2), PerturbationMode::metric_only,
                                   Bump{0.4, 0.7, 0.1});
  const auto loc = pert.at_distance(1, R(0.1));
  EXPECT_NEAR(d(pert.distance_to_pole(loc, 1)), 0.1, 1e-30);
}

TEST(Charts, LocateInvertsChartPoint)
{
  for (const auto &model : shipped_models()) {
    for (double frac : {1e-20, 1e-6, 0.3, 0.5, 0.6}) {
      const auto loc = model.at_gap(0, model.volume() * R(frac));
      const auto back = model.locate(model.chart_point(loc, 0, R(0.7)));
      EXPECT_LT(d(abs(back.gap_lo / loc.gap_lo - 1)), 1e-30) << model.descriptor().name();
      const auto loc1 = model.at_gap(1, model.volume() * R(frac));
      const auto back1 = model.locate(model.chart_point(loc1, 1));
      EXPECT_LT(d(abs(back1.gap_hi / loc1.gap_hi - 1)), 1e-30) << model.descriptor().name();
    }
  }
}

TEST(Charts, OverlapConsistency)
{
  for (const auto &model : shipped_models()) {
    for (double frac : {0.3, 0.5, 0.7}) {
      const auto loc = model.at_moment(model.volume() * R(frac));
      const auto a = model.locate(model.chart_point(loc, 0));
      const auto b = model.locate(model.chart_point(loc, 1));
      EXPECT_NEAR(d(model.scalar_curvature(a)), d(model.scalar_curvature(b)), 1e-8);
      if (model.has_singular_set()) {
        EXPECT_NEAR(d(model.distance_to_singular(a)), d(model.distance_to_singular(b)), 1e-8);
      }
    }
  }
}

TEST(Charts, DomainIsEnforced)
{
  const auto t = make_teardrop<R>(2);
  PointRef<R> far{0, t.chart_radius(0) * 2, R(0), false};
  EXPECT_THROW(t.locate(far), std::invalid_argument);
  EXPECT_THROW(t.locate(PointRef<R>{2, R(0), R(0), false}), std::invalid_argument);
}

TEST(Charts, TinyRadiusNearCone)
{
  const auto t = make_teardrop<R>(2);
  PointRef<R> z{1, R("1e-30"), R(0), true};
  const auto loc = t.locate(z);
  // In the orbifold chart gap = |z|^2 / m to leading order.
  EXPECT_NEAR(d(loc.gap_hi / R("1e-60")), 0.5, 1e-12);
  EXPECT_GT(loc.gap_hi, 0);
}

TEST(Perturbation, ZeroBumpLeavesModelUnchanged)
{
  const auto base = make_teardrop<R>(3);
  const auto same = perturb_metric(base, PerturbationMode::metric_only, Bump{0.0, 0.5, 0.1});
  EXPECT_EQ(same.descriptor(), base.descriptor());
  const auto loc = base.at_moment(base.volume() / 3);
  EXPECT_EQ(same.scalar_curvature(loc), base.scalar_curvature(loc));
}

TEST(Perturbation, MetricOnlyChangesRatioNotPrequantum)
{
  const Bump bump{0.3, 0.4, 0.15};
  const auto model = perturb_metric(make_projective_line<R>(1.0), PerturbationMode::metric_only, bump);
  // At the bump centre the ratio is 1 / (1 + A (4 c (1 - c))^2).
  const auto [ratio, lap] = model.volume_ratio_and_laplacian(model.at_moment(R(0.4)));
  const double q = 4 * 0.4 * 0.6;
  EXPECT_NEAR(d(ratio), 1.0 / (1.0 + 0.3 * q * q), 1e-15);
  EXPECT_NE(d(ratio), 1.0);
  EXPECT_LT(d(model.prequantum_residual(200)), 1e-10);
  // Reference curvature stays that of omega.
  const auto loc = model.at_moment(R(0.25));
  EXPECT_NEAR(d(model.scalar_curvature(loc, true)), 8 * M_PI, 1e-20);
  EXPECT_GT(std::abs(d(model.scalar_curvature(loc)) - 8 * M_PI), 1e-3);
  (void)lap;
}

TEST(Perturbation, LaplacianHasZeroMean)
{
  const auto model = perturb_metric(make_teardrop<R>(2), PerturbationMode::metric_only,
                                    Bump{0.5, 0.6, 0.12});
  const R mean = integrate_gl<R>(
      [&](const R &x) { return model.volume_ratio_and_laplacian(model.at_moment(x)).second; }, R(0),
      model.volume(), 300);
  EXPECT_LT(d(abs(mean)), 1e-20);
}

TEST(Perturbation, LaplacianMatchesFiniteDifferences)
{
  const auto model = perturb_metric(make_projective_line<R>(1.0), PerturbationMode::metric_only,
                                    Bump{0.3, 0.4, 0.15});
  // -4 pi (f F')' with F = log(omega / Theta), by central differences.
  auto flux = [&](const R &x) {
    const R h = R(1e-12);
    auto F = [&](const R &y) { return R(log(model.volume_ratio_and_laplacian(model.at_moment(y)).first)); };
    return model.profile(model.at_moment(x)).v * (F(x + h) - F(x - h)) / (2 * h);
  };
  for (double x : {0.2, 0.4, 0.65}) {
    const R h = R(1e-9);
    const R fd = -4 * pi<R>() * (flux(R(x) + h) - flux(R(x) - h)) / (2 * h);
    EXPECT_NEAR(d(fd), d(model.volume_ratio_and_laplacian(model.at_moment(R(x))).second), 1e-8);
  }
}

TEST(Perturbation, UnperturbedRatioIsTrivial)
{
  const auto t = make_teardrop<R>(2);
  for (double frac : {0.0, 0.3, 1.0}) {
    const auto [ratio, lap] = t.volume_ratio_and_laplacian(t.at_moment(t.volume() * R(frac)));
    EXPECT_EQ(ratio, 1);
    EXPECT_EQ(lap, 0);
  }
}

TEST(Perturbation, NonPositiveMetricRejected)
{
  EXPECT_THROW(perturb_metric(make_projective_line<R>(1.0), PerturbationMode::metric_only,
                              Bump{-2.0, 0.5, 0.1}),
               MetricNotPositive);
  EXPECT_THROW(perturb_metric(make_teardrop<R>(2), PerturbationMode::prequantum_pair,
                              Bump{-1.5, 0.5, 0.2}),
               MetricNotPositive);
  EXPECT_THROW(perturb_metric(make_teardrop<R>(2), PerturbationMode::metric_only, Bump{0.1, 1.5, 0.2}),
               InvalidModel);
}

TEST(Perturbation, PairModeKeepsVolumeAndPoles)
{
  const auto model = perturb_metric(make_teardrop<R>(2), PerturbationMode::prequantum_pair,
                                    Bump{0.25, 0.5, 0.2});
  EXPECT_EQ(model.volume(), R(1) / 2);
  EXPECT_NEAR(d(model.profile(model.at_pole(1)).d1), -0.5, 1e-30);
  EXPECT_NEAR(d(model.profile(model.at_pole(0)).d1), 1.0, 1e-30);
}

TEST(Descriptor, RoundTrip)
{
  for (const auto &model : shipped_models()) {
    const auto j = to_json(model.descriptor());
    const auto back = descriptor_from_json(nlohmann::json::parse(j.dump()));
    const auto rebuilt = make_model<R>(back);
    EXPECT_EQ(rebuilt.descriptor(), model.descriptor());
    EXPECT_EQ(to_json(rebuilt.descriptor()).dump(), j.dump());
    const auto loc = model.at_moment(model.volume() / 3);
    EXPECT_EQ(rebuilt.scalar_curvature(loc), model.scalar_curvature(loc));
  }
  EXPECT_THROW(descriptor_from_json(nlohmann::json{{"name", "torus"}}), InvalidModel);
  EXPECT_THROW(make_model<R>(descriptor_from_json(
                   nlohmann::json{{"name", "football"}, {"m", 2}, {"character", 1}})),
               FiberActionNotFaithful);
}

TEST(Geometry, LongDoubleInstantiation)
{
  const auto t = make_teardrop<long double>(2);
  EXPECT_NEAR(static_cast<double>(t.scalar_curvature(t.at_moment(0.1L))),
              static_cast<double>(-4 * M_PI * t.profile(t.at_moment(0.1L)).d2), 1e-12);
  EXPECT_LT(static_cast<double>(t.prequantum_residual(100)), 1e-5);
}
