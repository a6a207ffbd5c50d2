#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "crh/feature_space.hpp"
#include "support/oracles.hpp"

using namespace crh;

namespace {

RealVector random_vector(std::mt19937_64& rng, std::size_t l, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  RealVector v(l);
  for (double& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST(TanhNormalize, AxisVector) {
  const RealVector v{1.0, 0.0, 0.0, 0.0};
  const SaturatedVector y = tanh_normalize(v, 8.0);
  EXPECT_NEAR(y[0], 0.99999977, 1e-8);
  EXPECT_EQ(y[0], std::tanh(8.0));
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[3], 0.0);
}

TEST(TanhNormalize, ConstantVector) {
  const RealVector v(9, 2.5);
  const SaturatedVector y = tanh_normalize(v, 8.0);
  for (std::size_t k = 0; k < 9; ++k) EXPECT_NEAR(y[k], std::tanh(8.0 / 3.0), 1e-15);
}

TEST(TanhNormalize, PreservesSignsAndBounds) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 500; ++t) {
    const RealVector v = random_vector(rng, 1 + rng() % 40, 3.0);
    const double s1 = 0.1 + (rng() % 200) / 10.0;
    const SaturatedVector y = tanh_normalize(v, s1);
    for (std::size_t k = 0; k < v.size(); ++k) {
      ASSERT_EQ(std::signbit(y[k]), std::signbit(v[k]));
      ASSERT_LE(std::abs(y[k]), std::tanh(s1));
    }
  }
}

TEST(TanhNormalize, ScaleInvariant) {
  const RealVector v{0.3, -1.2, 2.0};
  RealVector w = v;
  for (double& x : w) x *= 1e6;
  const SaturatedVector a = tanh_normalize(v, 8.0), b = tanh_normalize(w, 8.0);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(a[k], b[k], 1e-15);
}

TEST(TanhNormalize, DegenerateNormIsAnError) {
  EXPECT_THROW(tanh_normalize(RealVector(4, 0.0), 8.0), NumericError);
  EXPECT_THROW(tanh_normalize(RealVector{1e-13, 0.0}, 8.0), NumericError);
  EXPECT_NO_THROW(tanh_normalize(RealVector{1e-11, 0.0}, 8.0));
  EXPECT_THROW(tanh_normalize(RealVector{1.0}, 0.0), DomainError);
}

TEST(NhdReal, Examples) {
  const RealVector a{0.9, -0.9}, b{0.9, 0.9};
  EXPECT_NEAR(nhd_span(a, b), 0.9, 1e-15);
  EXPECT_EQ(nhd_span(a, a), 0.0);
  const double d = 0.01;
  const RealVector p{1 - d, -(1 - d), 1 - d}, q{-(1 - d), 1 - d, -(1 - d)};
  EXPECT_NEAR(nhd_span(p, q), 2.0 * (1 - d), 1e-15);
  EXPECT_THROW(nhd_span(a, RealVector{1.0}), DomainError);
}

TEST(NhdReal, IsAMetricInsideTheCube) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 300; ++t) {
    const std::size_t l = 1 + rng() % 32;
    const SaturatedVector a = tanh_normalize(random_vector(rng, l), 8.0);
    const SaturatedVector b = tanh_normalize(random_vector(rng, l), 8.0);
    const SaturatedVector c = tanh_normalize(random_vector(rng, l), 8.0);
    const double ab = nhd_real(a, b);
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, 2.0);
    ASSERT_EQ(ab, nhd_real(b, a));
    ASSERT_EQ(nhd_real(a, a), 0.0);
    ASSERT_LE(ab, nhd_real(a, c) + nhd_real(c, b) + 1e-15);
  }
}

TEST(NhdReal, ApproachesCodeDistanceForLargeScale) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const std::size_t l = 4 + rng() % 12;
    RealVector v = random_vector(rng, l), w = random_vector(rng, l);
    bool clear = true;
    for (std::size_t k = 0; k < l; ++k)
      clear = clear && std::abs(v[k]) / l2_norm(v) > 0.2 && std::abs(w[k]) / l2_norm(w) > 0.2;
    if (!clear) continue;
    const double real = nhd_real(tanh_normalize(v, 50.0), tanh_normalize(w, 50.0));
    EXPECT_NEAR(real, nhd_codes(sign_quantize(v), sign_quantize(w)), 1e-3);
  }
}

TEST(SignQuantize, ZeroMapsToOne) {
  const BitCode c = sign_quantize(RealVector{0.3, -0.2, 0.0});
  EXPECT_TRUE(c.bit(0));
  EXPECT_FALSE(c.bit(1));
  EXPECT_TRUE(c.bit(2));
  EXPECT_EQ(sign_quantize(RealVector{-0.0}).bit(0), true);
}

TEST(SignQuantize, AllNegativeIsZeroCode) {
  EXPECT_EQ(sign_quantize(RealVector(70, -1.0)), BitCode(70));
}

TEST(SignQuantize, UnchangedBySaturation) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 1000; ++t) {
    const RealVector v = random_vector(rng, 1 + rng() % 100);
    const SaturatedVector y = tanh_normalize(v, 8.0);
    ASSERT_EQ(sign_quantize(v), sign_quantize(y.values()));
  }
}

TEST(GradTanhNormalize, ZeroUpstreamGivesZero) {
  const RealVector v{0.4, -1.0, 2.0};
  for (double g : grad_tanh_normalize(v, 8.0, RealVector(3, 0.0))) EXPECT_EQ(g, 0.0);
}

TEST(GradTanhNormalize, SmallScaleIsProjection) {
  const double s1 = 0.01;
  RealVector v{0.6, -0.8, 0.0};
  for (std::size_t j = 0; j < 3; ++j) {
    RealVector e(3, 0.0);
    e[j] = 1.0;
    const RealVector col = grad_tanh_normalize(v, s1, e);
    for (std::size_t k = 0; k < 3; ++k) {
      const double proj = s1 * ((k == j ? 1.0 : 0.0) - v[k] * v[j]);
      EXPECT_NEAR(col[k], proj, 1e-5);
    }
  }
}

TEST(GradTanhNormalize, MatchesCentralDifferences) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 100; ++t) {
    RealVector v = random_vector(rng, 8);
    const RealVector up = random_vector(rng, 8);
    const double s1 = 0.5 + (rng() % 100) / 10.0;
    const RealVector analytic = grad_tanh_normalize(v, s1, up);
    const auto numeric = oracle::numeric_gradient(
        [&] {
          const SaturatedVector y = tanh_normalize(v, s1);
          return dot(y.values(), up);
        },
        v);
    ASSERT_LT(oracle::rel_error(analytic, numeric), 1e-4) << "instance " << t;
  }
}

TEST(GradTanhNormalize, DegenerateNormIsAnError) {
  EXPECT_THROW(grad_tanh_normalize(RealVector(3, 0.0), 8.0, RealVector(3, 1.0)), NumericError);
}
