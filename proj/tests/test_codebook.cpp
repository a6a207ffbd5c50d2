#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "crh/codebook.hpp"
#include "support/oracles.hpp"

using namespace crh;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (double& x : m.flat()) x = g(rng);
  return m;
}

CodebookSet random_codebooks(std::mt19937_64& rng, std::size_t bits, std::size_t dim) {
  return {random_matrix(rng, bits, dim), random_matrix(rng, bits, dim)};
}

CodebookSet one_d(double mu0, double mu1) {
  CodebookSet cb{Matrix(1, 1, mu0), Matrix(1, 1, mu1)};
  return cb;
}

// Written out from the definition, p computed from the same q and then used
// as given.
double dec_reference(const Matrix& z, const CodebookSet& cb) {
  double total = 0.0;
  for (std::size_t k = 0; k < cb.bits(); ++k) {
    const std::size_t n = z.rows();
    std::vector<std::array<double, 2>> q(n);
    std::array<double, 2> f{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      double u[2];
      for (int c = 0; c < 2; ++c) {
        const auto mu = c == 0 ? cb.mu0.row(k) : cb.mu1.row(k);
        double d2 = 0.0;
        for (std::size_t i = 0; i < z.cols(); ++i) d2 += (z(j, i) - mu[i]) * (z(j, i) - mu[i]);
        u[c] = 1.0 / (1.0 + d2);
      }
      for (int c = 0; c < 2; ++c) f[c] += q[j][c] = u[c] / (u[0] + u[1]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double p0 = q[j][0] * q[j][0] / f[0], p1 = q[j][1] * q[j][1] / f[1];
      const double s = p0 + p1;
      total += (p0 / s) * std::log((p0 / s) / q[j][0]) + (p1 / s) * std::log((p1 / s) / q[j][1]);
    }
  }
  return total / static_cast<double>(cb.bits());
}

}  // namespace

TEST(Deltas, EquidistantIsZero) {
  CodebookSet cb{Matrix(1, 2), Matrix(1, 2)};
  cb.mu0(0, 0) = -1.0;
  cb.mu1(0, 0) = 1.0;
  EXPECT_EQ(deltas(RealVector{0.0, 3.0}, cb)[0], 0.0);
}

TEST(Deltas, AtSecondCentroidIsSeparation) {
  std::mt19937_64 rng(1);
  const CodebookSet cb = random_codebooks(rng, 1, 4);
  const RealVector z(cb.mu1.row(0).begin(), cb.mu1.row(0).end());
  const double sep = l2_distance(cb.mu0.row(0), cb.mu1.row(0));
  EXPECT_NEAR(deltas(z, cb)[0], sep, 1e-15);
  EXPECT_GT(deltas(z, cb)[0], 0.0);
}

TEST(Deltas, OneDimensionalHandExample) {
  EXPECT_EQ(deltas(RealVector{1.0}, one_d(0.0, 3.0))[0], -1.0);
}

TEST(Deltas, TranslationInvariant) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 1 + rng() % 6, bits = 1 + rng() % 8;
    CodebookSet cb = random_codebooks(rng, bits, d);
    RealVector z(d);
    for (double& x : z) x = g(rng);
    const RealVector before = deltas(z, cb);
    RealVector shift(d);
    for (double& x : shift) x = g(rng);
    for (std::size_t i = 0; i < d; ++i) z[i] += shift[i];
    for (std::size_t k = 0; k < bits; ++k)
      for (std::size_t i = 0; i < d; ++i) {
        cb.mu0(k, i) += shift[i];
        cb.mu1(k, i) += shift[i];
      }
    const RealVector after = deltas(z, cb);
    for (std::size_t k = 0; k < bits; ++k) {
      ASSERT_NEAR(before[k], after[k], 1e-9);
      if (std::abs(before[k]) > 1e-9) {
        ASSERT_EQ(before[k] > 0, after[k] > 0);
      }
    }
  }
}

TEST(Deltas, DimensionMismatchThrows) {
  EXPECT_THROW(deltas(RealVector{1.0, 2.0}, one_d(0.0, 1.0)), DomainError);
  EXPECT_THROW(codebook_encode(RealVector{1.0, 2.0}, one_d(0.0, 1.0)), DomainError);
}

TEST(CodebookEncode, AtSecondCentroidsIsAllOnes) {
  std::mt19937_64 rng(3);
  CodebookSet cb = random_codebooks(rng, 10, 3);
  for (std::size_t k = 0; k < 10; ++k)
    for (std::size_t i = 0; i < 3; ++i) cb.mu1(k, i) = 0.25 * static_cast<double>(i);
  const BitCode c = codebook_encode(RealVector{0.0, 0.25, 0.5}, cb);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_TRUE(c.bit(k));
}

TEST(CodebookEncode, TiesGoToZero) {
  CodebookSet cb{Matrix(5, 2), Matrix(5, 2)};
  for (std::size_t k = 0; k < 5; ++k) {
    cb.mu0(k, 0) = -static_cast<double>(k + 1);
    cb.mu1(k, 0) = static_cast<double>(k + 1);
  }
  EXPECT_EQ(codebook_encode(RealVector{0.0, 1.0}, cb), BitCode(5));
}

TEST(CodebookEncode, AgreesWithDeltaSigns) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  const CodebookSet cb = random_codebooks(rng, 24, 6);
  for (int t = 0; t < 10000; ++t) {
    RealVector z(6);
    for (double& x : z) x = g(rng);
    const RealVector d = deltas(z, cb);
    const BitCode c = codebook_encode(z, cb);
    for (std::size_t k = 0; k < 24; ++k) ASSERT_EQ(c.bit(k), d[k] > 0.0);
  }
}

TEST(DeltasBackward, MatchesCentralDifferences) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 1 + rng() % 6, bits = 1 + rng() % 6;
    CodebookSet cb = random_codebooks(rng, bits, d);
    RealVector z(d), up(bits);
    for (double& x : z) x = g(rng);
    for (double& x : up) x = g(rng);
    const DeltasGrad grad = deltas_backward(z, cb, up);
    auto f = [&] { return dot(deltas(z, cb), up); };
    ASSERT_LT(oracle::rel_error(grad.z, oracle::numeric_gradient(f, z)), 1e-4);
    ASSERT_LT(oracle::rel_error(grad.mu0.flat(), oracle::numeric_gradient(f, cb.mu0.flat())), 1e-4);
    ASSERT_LT(oracle::rel_error(grad.mu1.flat(), oracle::numeric_gradient(f, cb.mu1.flat())), 1e-4);
  }
}

TEST(DeltasBackward, ZeroDistanceHasZeroGradient) {
  const CodebookSet cb = one_d(2.0, 5.0);
  const DeltasGrad g = deltas_backward(RealVector{2.0}, cb, RealVector{1.0});
  EXPECT_EQ(g.mu0(0, 0), 0.0);
  EXPECT_TRUE(std::isfinite(g.z[0]));
}

TEST(DecLoss, SymmetricCaseIsZero) {
  CodebookSet cb{Matrix(3, 2), Matrix(3, 2)};
  for (std::size_t k = 0; k < 3; ++k) {
    cb.mu0(k, 0) = -1.0 - k;
    cb.mu1(k, 0) = 1.0 + k;
  }
  Matrix z(4, 2);
  for (std::size_t j = 0; j < 4; ++j) z(j, 1) = static_cast<double>(j) - 1.5;
  const DecLossOutput out = dec_loss(z, cb);
  EXPECT_NEAR(out.value, 0.0, 1e-15);
  for (double x : out.grad_mu0.flat()) EXPECT_NEAR(x, 0.0, 1e-15);
}

TEST(DecLoss, SinglePointAtCentroid) {
  const CodebookSet cb = one_d(0.0, 10.0);
  Matrix z(1, 1, 0.0);
  const double q0 = 1.0 / (1.0 + 1.0 / 101.0), q1 = 1.0 - q0;
  const double p0 = q0 * q0 / q0, p1 = q1 * q1 / q1;
  const double s = p0 + p1;
  const double expected = (p0 / s) * std::log((p0 / s) / q0) + (p1 / s) * std::log((p1 / s) / q1);
  EXPECT_NEAR(dec_loss(z, cb).value, expected, 1e-15);
  EXPECT_NEAR(expected, 0.0, 1e-12);
}

TEST(DecLoss, MatchesDefinitionAndIsNonNegative) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 3000; ++t) {
    const std::size_t n = 1 + rng() % 20, d = 1 + rng() % 6, bits = 1 + rng() % 6;
    const Matrix z = random_matrix(rng, n, d, 2.0);
    const CodebookSet cb = random_codebooks(rng, bits, d);
    const double v = dec_loss(z, cb).value;
    ASSERT_GE(v, 0.0);
    ASSERT_NEAR(v, dec_reference(z, cb), 1e-12);
  }
}

TEST(DecLoss, GradientsMatchCentralDifferencesWithTargetHeld) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 8, d = 1 + rng() % 4, bits = 1 + rng() % 4;
    Matrix z = random_matrix(rng, n, d, 1.5);
    CodebookSet cb = random_codebooks(rng, bits, d);
    const DecLossOutput out = dec_loss(z, cb);

    // Freeze p at the current point, then differentiate KL(p || q) in q only.
    std::vector<std::array<double, 2>> p(bits * n);
    {
      for (std::size_t k = 0; k < bits; ++k) {
        std::vector<std::array<double, 2>> q(n);
        std::array<double, 2> f{0.0, 0.0};
        for (std::size_t j = 0; j < n; ++j) {
          const double u0 = 1.0 / (1.0 + std::pow(l2_distance(z.row(j), cb.mu0.row(k)), 2));
          const double u1 = 1.0 / (1.0 + std::pow(l2_distance(z.row(j), cb.mu1.row(k)), 2));
          q[j] = {u0 / (u0 + u1), u1 / (u0 + u1)};
          f[0] += q[j][0];
          f[1] += q[j][1];
        }
        for (std::size_t j = 0; j < n; ++j) {
          const double a = q[j][0] * q[j][0] / f[0], b = q[j][1] * q[j][1] / f[1];
          p[k * n + j] = {a / (a + b), b / (a + b)};
        }
      }
    }
    auto frozen = [&] {
      double total = 0.0;
      for (std::size_t k = 0; k < bits; ++k)
        for (std::size_t j = 0; j < n; ++j) {
          const double u0 = 1.0 / (1.0 + std::pow(l2_distance(z.row(j), cb.mu0.row(k)), 2));
          const double u1 = 1.0 / (1.0 + std::pow(l2_distance(z.row(j), cb.mu1.row(k)), 2));
          const double q0 = u0 / (u0 + u1), q1 = u1 / (u0 + u1);
          const auto& pk = p[k * n + j];
          total += pk[0] * std::log(pk[0] / q0) + pk[1] * std::log(pk[1] / q1);
        }
      return total / static_cast<double>(bits);
    };
    ASSERT_NEAR(frozen(), out.value, 1e-12);
    ASSERT_LT(oracle::rel_error(out.grad_mu0.flat(), oracle::numeric_gradient(frozen, cb.mu0.flat())), 1e-4);
    ASSERT_LT(oracle::rel_error(out.grad_mu1.flat(), oracle::numeric_gradient(frozen, cb.mu1.flat())), 1e-4);
    ASSERT_LT(oracle::rel_error(out.grad_z.flat(), oracle::numeric_gradient(frozen, z.flat())), 1e-4);
  }
}

TEST(InitCodebooks, SeparatedAndSeeded) {
  std::mt19937_64 rng(8);
  const Matrix z = random_matrix(rng, 30, 5);
  const CodebookSet a = init_codebooks(z, 12, 3), b = init_codebooks(z, 12, 3);
  EXPECT_EQ(a, b);
  for (std::size_t k = 0; k < 12; ++k)
    EXPECT_GE(l2_distance(a.mu0.row(k), a.mu1.row(k)), kCentroidSeparation);
  EXPECT_THROW(init_codebooks(Matrix(1, 5), 4, 0), DomainError);
}

TEST(InitCodebooks, DuplicateRowsStillSeparate) {
  const CodebookSet cb = init_codebooks(Matrix(4, 3, 1.0), 8, 11);
  for (std::size_t k = 0; k < 8; ++k)
    EXPECT_GE(l2_distance(cb.mu0.row(k), cb.mu1.row(k)), kCentroidSeparation);
}
