#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "twae/tessellation.hpp"

using namespace twae;

namespace {

Tessellation line_pair() { return Tessellation(TessellationKind::CVT, PointSet{{-0.5}, {0.5}}); }

}  // namespace

TEST(SampleUnitBall, OneDimensionalMeanAndRange) {
  const PointSet p = sample_unit_ball(1, 100000, 1);
  double mean = 0.0, mx = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mean += p[i][0];
    mx = std::max(mx, std::abs(p[i][0]));
  }
  EXPECT_NEAR(mean / 1e5, 0.0, 0.02);
  EXPECT_LE(mx, 1.0);
}

TEST(SampleUnitBall, RadialLawInEightDimensions) {
  const std::size_t n = 100000;
  const PointSet p = sample_unit_ball(8, n, 2);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < n; ++i) inside += squared_norm(p[i]) <= 0.25;
  const double q = std::pow(0.5, 8);
  const double se = std::sqrt(q * (1 - q) / static_cast<double>(n));
  EXPECT_NEAR(static_cast<double>(inside) / static_cast<double>(n), q, 3 * se);
}

TEST(SampleUnitBall, Deterministic) { EXPECT_EQ(sample_unit_ball(2, 4, 9), sample_unit_ball(2, 4, 9)); }

TEST(RegionOf, NearestWithLowestIndexTies) {
  const Tessellation t = line_pair();
  const std::vector<double> a{0.3}, b{0.0};
  EXPECT_EQ(region_of(t, a), 1u);
  EXPECT_EQ(region_of(t, b), 0u);
  const std::vector<double> bad{0.1, 0.2};
  EXPECT_THROW(region_of(t, bad), DimensionError);
}

TEST(RegionOf, E8OriginIsCentre) {
  const Tessellation t(TessellationKind::E8, e8_generators(0.6), 0.6);
  const std::vector<double> origin(8, 0.0);
  EXPECT_EQ(region_of(t, origin), 0u);
}

TEST(Tessellation, ValidatesGenerators) {
  EXPECT_THROW(Tessellation(TessellationKind::CVT, PointSet{{1.5}}), Error);
  EXPECT_THROW(Tessellation(TessellationKind::CVT, PointSet{{0.2}, {0.2}}), Error);
  EXPECT_THROW(Tessellation(TessellationKind::E8, PointSet{{0.2}, {0.3}}), Error);
}

TEST(LloydCvt, TwoGeneratorsOnTheLine) {
  const auto r = lloyd_cvt({.dim = 1, .m = 2, .mc_samples_per_iter = 200000, .seed = 3});
  std::vector<double> g{r.tessellation.generators()[0][0], r.tessellation.generators()[1][0]};
  std::sort(g.begin(), g.end());
  EXPECT_NEAR(g[0], -0.5, 0.02);
  EXPECT_NEAR(g[1], 0.5, 0.02);
}

TEST(LloydCvt, SingleGeneratorAtOrigin) {
  const auto r = lloyd_cvt({.dim = 2, .m = 1, .mc_samples_per_iter = 20000, .seed = 4});
  EXPECT_LT(std::sqrt(squared_norm(r.tessellation.generators()[0])), 0.02);
}

TEST(LloydCvt, EnergyNonIncreasingWithinTolerance) {
  const auto r = lloyd_cvt({.dim = 2, .m = 16, .mc_samples_per_iter = 200000, .seed = 5});
  ASSERT_GE(r.energy_history.size(), 2u);
  for (std::size_t i = 1; i < r.energy_history.size(); ++i)
    EXPECT_LE(r.energy_history[i], r.energy_history[i - 1] * 1.01) << "iteration " << i;
}

TEST(LloydCvt, EquispacedQuantizerInOneDimension) {
  const auto r = lloyd_cvt({.dim = 1, .m = 4, .mc_samples_per_iter = 200000, .max_iters = 400, .energy_tol = 1e-6,
                            .seed = 6});
  std::vector<double> g;
  for (std::size_t j = 0; j < 4; ++j) g.push_back(r.tessellation.generators()[j][0]);
  std::sort(g.begin(), g.end());
  const double expect[4] = {-0.75, -0.25, 0.25, 0.75};
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(g[j], expect[j], 0.05);
}

TEST(LloydCvt, RejectsSmallPool) { EXPECT_THROW(lloyd_cvt({.dim = 2, .m = 16, .mc_samples_per_iter = 100}), Error); }

TEST(KmeansCvt, TwoGeneratorsOnTheLine) {
  const Tessellation t = kmeans_cvt(1, 2, 1000000, 7);
  std::vector<double> g{t.generators()[0][0], t.generators()[1][0]};
  std::sort(g.begin(), g.end());
  EXPECT_NEAR(g[0], -0.5, 0.05);
  EXPECT_NEAR(g[1], 0.5, 0.05);
}

TEST(KmeansCvt, EnergyCloseToLloyd) {
  const Tessellation k = kmeans_cvt(2, 8, 200000, 8);
  const auto l = lloyd_cvt({.dim = 2, .m = 8, .mc_samples_per_iter = 100000, .seed = 8});
  const double ek = cvt_energy(k, 200000, 80), el = cvt_energy(l.tessellation, 200000, 80);
  EXPECT_NEAR(ek, el, 0.1 * el);
}

TEST(KmeansCvt, SingleGeneratorIsRunningMean) {
  const std::uint64_t seed = 9;
  const std::size_t draws = 1000;
  const Tessellation t = kmeans_cvt(2, 1, draws, seed);
  // Oracle: mean of the initial point and every draw, replaying both streams.
  const PointSet init = sample_unit_ball(2, 1, derive_seed(seed, 0));
  double sx = init[0][0], sy = init[0][1];
  Rng rng(derive_seed(seed, 1));
  std::vector<double> y(2);
  for (std::size_t i = 0; i < draws; ++i) {
    draw_ball_point(rng, y);
    sx += y[0];
    sy += y[1];
  }
  EXPECT_NEAR(t.generators()[0][0], sx / (draws + 1), 1e-12);
  EXPECT_NEAR(t.generators()[0][1], sy / (draws + 1), 1e-12);
}

TEST(KmeansCvt, RejectsTooFewDraws) { EXPECT_THROW(kmeans_cvt(2, 4, 3999, 1), Error); }

TEST(CvtEnergy, SingleGeneratorMoments) {
  const Tessellation disk(TessellationKind::CVT, PointSet{{0.0, 0.0}});
  EXPECT_NEAR(cvt_energy(disk, 100000, 1), 0.5, 0.01);
  const Tessellation line(TessellationKind::CVT, PointSet{{0.0}});
  EXPECT_NEAR(cvt_energy(line, 100000, 2), 1.0 / 3.0, 1.0 / 150.0);
}

TEST(CvtEnergy, PerturbationIncreasesEnergy) {
  const Tessellation cvt = line_pair();
  const Tessellation moved(TessellationKind::CVT, PointSet{{-0.3}, {0.7}});
  EXPECT_GT(cvt_energy(moved, 100000, 3), cvt_energy(cvt, 100000, 3));
}

TEST(E8Roots, CountsNormsAndClosure) {
  const PointSet r = e8_roots();
  ASSERT_EQ(r.size(), 240u);
  std::size_t integer = 0, half = 0;
  std::set<std::vector<double>> all;
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(squared_norm(r[i]), 2.0);
    const bool is_half = std::abs(r[i][0]) == 0.5;
    (is_half ? half : integer)++;
    all.insert(std::vector<double>(r[i].begin(), r[i].end()));
  }
  EXPECT_EQ(integer, 112u);
  EXPECT_EQ(half, 128u);
  EXPECT_EQ(all.size(), 240u);
  for (std::size_t i = 0; i < r.size(); ++i) {
    std::vector<double> neg(r[i].begin(), r[i].end());
    for (double& v : neg) v = -v;
    EXPECT_TRUE(all.count(neg));
    for (std::size_t j = 0; j < i; ++j) {
      const double ip = dot(r[i], r[j]);
      EXPECT_TRUE(ip == -2.0 || ip == -1.0 || ip == 0.0 || ip == 1.0) << ip;
    }
  }
}

TEST(E8Roots, LexicographicOrder) {
  const PointSet r = e8_roots();
  for (std::size_t i = 1; i < r.size(); ++i)
    EXPECT_TRUE(std::lexicographical_compare(r[i - 1].begin(), r[i - 1].end(), r[i].begin(), r[i].end()));
}

TEST(E8Tessellation, RegionCountAndCentreVolume) {
  const Tessellation t = e8_tessellation({.calibration_samples = 1000000, .seed = 1});
  EXPECT_EQ(t.region_count(), kE8RegionCount);
  EXPECT_EQ(t.kind(), TessellationKind::E8);
  ASSERT_TRUE(t.shell_radius().has_value());
  const PointSet audit = sample_unit_ball(8, 200000, 2);
  std::size_t centre = 0;
  for (std::size_t i = 0; i < audit.size(); ++i) centre += region_of(t, audit[i]) == 0;
  EXPECT_NEAR(static_cast<double>(centre) / 200000.0, 1.0 / 241.0, 0.15 / 241.0);
}

TEST(E8Tessellation, RejectsSmallCalibration) {
  EXPECT_THROW(e8_tessellation({.calibration_samples = 999999}), Error);
}

TEST(E8Tessellation, RegionOfIsScaleEquivariant) {
  const Tessellation a(TessellationKind::E8, e8_generators(0.4));
  const Tessellation b(TessellationKind::E8, e8_generators(0.8));
  const PointSet p = sample_unit_ball(8, 500, 3);
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<double> small(p[i].begin(), p[i].end());
    for (double& v : small) v *= 0.5;
    EXPECT_EQ(region_of(a, small), region_of(b, p[i]));
  }
}

TEST(SampleRegion, PointsLieInRegion) {
  const auto t = lloyd_cvt({.dim = 2, .m = 8, .seed = 1}).tessellation;
  for (std::size_t k = 0; k < 8; ++k) {
    const PointSet s = sample_region(t, k, 50, k);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(region_of(t, s[i]), k);
  }
}

TEST(SampleRegion, SingleRegionMatchesBall) {
  const Tessellation t(TessellationKind::CVT, PointSet{{0.1, 0.0}});
  EXPECT_EQ(sample_region(t, 0, 100, 5), sample_unit_ball(2, 100, 5));
}

TEST(SampleRegion, HalfLine) {
  const PointSet s = sample_region(line_pair(), 1, 20000, 6);
  double mean = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_GT(s[i][0], 0.0);
    EXPECT_LE(s[i][0], 1.0);
    mean += s[i][0];
  }
  EXPECT_NEAR(mean / 20000.0, 0.5, 0.02);
}

TEST(SampleRegion, ComposedRegionsReproduceBallMean) {
  const auto t = lloyd_cvt({.dim = 2, .m = 6, .seed = 2}).tessellation;
  const std::size_t per = 2000;
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < 6; ++k) {
    const PointSet s = sample_region(t, k, per, 10 + k);
    for (std::size_t i = 0; i < per; ++i) {
      mx += s[i][0];
      my += s[i][1];
    }
  }
  const double n = 6.0 * per;
  // Per-coordinate variance of the uniform disk is 1/4; the stratified mean has smaller spread.
  const double se = std::sqrt(0.25 / n);
  EXPECT_NEAR(mx / n, 0.0, 3 * se);
  EXPECT_NEAR(my / n, 0.0, 3 * se);
}

TEST(SampleRegion, DegenerateRegionAborts) {
  const Tessellation t(TessellationKind::CVT, PointSet{{0.0}, {0.999}, {1.0}});
  EXPECT_THROW(sample_region(t, 2, 1000, 1), DegenerateRegionError);
  EXPECT_THROW(sample_region(t, 3, 10, 1), Error);
}

TEST(TessellationJson, RoundTripIsExact) {
  const auto t = lloyd_cvt({.dim = 3, .m = 5, .seed = 3}).tessellation;
  const Tessellation back = tessellation_from_json(nlohmann::json::parse(to_json(t).dump()));
  EXPECT_EQ(back.generators(), t.generators());
  EXPECT_EQ(back.kind(), t.kind());
  const Tessellation e(TessellationKind::E8, e8_generators(0.61), 0.61);
  const Tessellation eb = tessellation_from_json(nlohmann::json::parse(to_json(e).dump()));
  EXPECT_EQ(eb.shell_radius(), e.shell_radius());
  EXPECT_EQ(eb.kind(), TessellationKind::E8);
}
