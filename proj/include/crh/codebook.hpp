#ifndef CRH_CODEBOOK_HPP
#define CRH_CODEBOOK_HPP

// Clustering-based variant: one two-centroid codebook per bit. The continuous
// surrogate for bit k is |z - mu0_k| - |z - mu1_k| (positive = closer to mu1),
// the bit itself is the nearer centroid, and a DEC loss tightens the clusters.

#include <random>
#include <span>

#include "crh/common.hpp"
#include "crh/hamming.hpp"

namespace crh {

inline constexpr double kCentroidSeparation = 1e-6;

struct CodebookSet {
  Matrix mu0;  // l x D
  Matrix mu1;  // l x D

  std::size_t bits() const noexcept { return mu0.rows(); }
  std::size_t dim() const noexcept { return mu0.cols(); }

  friend bool operator==(const CodebookSet&, const CodebookSet&) = default;
};

inline double l2_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

inline void check_codebook_input(std::span<const double> z, const CodebookSet& cb) {
  if (z.size() != cb.dim()) throw DomainError("feature length does not match codebook dimension");
}

inline RealVector deltas(std::span<const double> z, const CodebookSet& cb) {
  check_codebook_input(z, cb);
  RealVector out(cb.bits());
  for (std::size_t k = 0; k < cb.bits(); ++k)
    out[k] = l2_distance(z, cb.mu0.row(k)) - l2_distance(z, cb.mu1.row(k));
  return out;
}

/// bit k = 1 iff mu1_k is strictly nearer than mu0_k; ties give 0.
inline BitCode codebook_encode(std::span<const double> z, const CodebookSet& cb) {
  check_codebook_input(z, cb);
  BitCode code(cb.bits());
  for (std::size_t k = 0; k < cb.bits(); ++k)
    code.set(k, l2_distance(z, cb.mu1.row(k)) < l2_distance(z, cb.mu0.row(k)));
  return code;
}

struct DeltasGrad {
  RealVector z;
  Matrix mu0;
  Matrix mu1;
};

/// Reverse pass of deltas. The gradient of |x| at x = 0 is taken as 0.
inline void deltas_backward_into(std::span<const double> z, const CodebookSet& cb,
                                 std::span<const double> upstream, std::span<double> grad_z,
                                 Matrix& grad_mu0, Matrix& grad_mu1) {
  const std::size_t d = cb.dim();
  for (std::size_t k = 0; k < cb.bits(); ++k) {
    const double g = upstream[k];
    if (g == 0.0) continue;
    auto m0 = cb.mu0.row(k);
    auto m1 = cb.mu1.row(k);
    const double d0 = l2_distance(z, m0), d1 = l2_distance(z, m1);
    const double c0 = d0 > 0.0 ? g / d0 : 0.0;
    const double c1 = d1 > 0.0 ? g / d1 : 0.0;
    auto g0 = grad_mu0.row(k);
    auto g1 = grad_mu1.row(k);
    for (std::size_t j = 0; j < d; ++j) {
      const double u0 = (z[j] - m0[j]) * c0;
      const double u1 = (z[j] - m1[j]) * c1;
      grad_z[j] += u0 - u1;
      g0[j] -= u0;
      g1[j] += u1;
    }
  }
}

inline DeltasGrad deltas_backward(std::span<const double> z, const CodebookSet& cb,
                                  std::span<const double> upstream) {
  check_codebook_input(z, cb);
  require(upstream.size() == cb.bits(), "deltas_backward: upstream length mismatch");
  DeltasGrad out{RealVector(cb.dim(), 0.0), Matrix(cb.bits(), cb.dim()),
                 Matrix(cb.bits(), cb.dim())};
  deltas_backward_into(z, cb, upstream, out.z, out.mu0, out.mu1);
  return out;
}

struct DecLossOutput {
  double value = 0.0;
  Matrix grad_z;  // n x D
  Matrix grad_mu0;
  Matrix grad_mu1;
};

/// DEC loss averaged over the l codebooks. Soft assignments use a Student-t
/// kernel with one degree of freedom; the sharpened target is held constant
/// for the gradient.
inline DecLossOutput dec_loss(const Matrix& z, const CodebookSet& cb) {
  const std::size_t n = z.rows(), d = cb.dim(), bits = cb.bits();
  require(n >= 1, "dec_loss needs at least one point");
  require(z.cols() == d, "dec_loss: feature width does not match codebook dimension");
  DecLossOutput out{0.0, Matrix(n, d), Matrix(bits, d), Matrix(bits, d)};
  const double inv_bits = 1.0 / static_cast<double>(bits);

  std::vector<double> q(2 * n), u(2 * n);
  for (std::size_t k = 0; k < bits; ++k) {
    const std::span<const double> mu[2] = {cb.mu0.row(k), cb.mu1.row(k)};
    double f[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      for (int c = 0; c < 2; ++c) {
        const double dist = l2_distance(z.row(j), mu[c]);
        u[2 * j + c] = 1.0 / (1.0 + dist * dist);
      }
      const double norm = u[2 * j] + u[2 * j + 1];
      for (int c = 0; c < 2; ++c) f[c] += (q[2 * j + c] = u[2 * j + c] / norm);
    }
    Matrix* gmu[2] = {&out.grad_mu0, &out.grad_mu1};
    for (std::size_t j = 0; j < n; ++j) {
      double p[2], norm = 0.0, kl = 0.0;
      for (int c = 0; c < 2; ++c) norm += (p[c] = q[2 * j + c] * q[2 * j + c] / f[c]);
      for (int c = 0; c < 2; ++c) {
        p[c] /= norm;
        const double qc = q[2 * j + c];
        if (p[c] > 0.0) kl += p[c] * std::log(p[c] / qc);
        // dL/d|z - mu|^2 = u (p - q)
        const double coef = inv_bits * 2.0 * u[2 * j + c] * (p[c] - qc);
        auto zj = z.row(j);
        auto gz = out.grad_z.row(j);
        auto gm = gmu[c]->row(k);
        for (std::size_t i = 0; i < d; ++i) {
          const double diff = coef * (zj[i] - mu[c][i]);
          gz[i] += diff;
          gm[i] -= diff;
        }
      }
      // Each point's KL term is non-negative; rounding can leave it at -1e-17.
      out.value += inv_bits * std::max(0.0, kl);
    }
  }
  return out;
}

/// Each codebook starts at two distinct random rows of z plus small jitter.
inline CodebookSet init_codebooks(const Matrix& z, std::size_t bits, std::uint64_t seed) {
  require(z.rows() >= 2, "codebook init needs at least two samples");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, z.rows() - 1);
  std::normal_distribution<double> jitter(0.0, 1e-3);
  CodebookSet cb{Matrix(bits, z.cols()), Matrix(bits, z.cols())};
  for (std::size_t k = 0; k < bits; ++k) {
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    while (b == a) b = pick(rng);
    do {
      auto m0 = cb.mu0.row(k);
      auto m1 = cb.mu1.row(k);
      for (std::size_t i = 0; i < z.cols(); ++i) {
        m0[i] = z(a, i) + jitter(rng);
        m1[i] = z(b, i) + jitter(rng);
      }
    } while (l2_distance(cb.mu0.row(k), cb.mu1.row(k)) < kCentroidSeparation);
  }
  return cb;
}

}  // namespace crh

#endif  // CRH_CODEBOOK_HPP
