#ifndef CRH_FEATURE_SPACE_HPP
#define CRH_FEATURE_SPACE_HPP

// Continuous pre-hash geometry: v -> tanh(s1 * v / |v|_2), the real-valued
// normalized Hamming distance, sign quantization and the backward pass of the
// saturating map.

#include <span>
#include <vector>

#include "crh/common.hpp"
#include "crh/hamming.hpp"

namespace crh {

/// Norms at or below this are rejected by tanh_normalize.
inline constexpr double kNormEpsilon = 1e-12;

/// Components of tanh(s1 * v / |v|), each strictly inside (-1, 1).
class SaturatedVector {
 public:
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }

 private:
  friend SaturatedVector tanh_normalize(std::span<const double>, double);
  explicit SaturatedVector(RealVector v) : values_(std::move(v)) {}
  RealVector values_;
};

/// Writes tanh(s1 * v / |v|) into out. Throws NumericError on a degenerate norm.
inline void tanh_normalize_into(std::span<const double> v, double s1, std::span<double> out) {
  const double n = l2_norm(v);
  if (!(n > kNormEpsilon)) throw NumericError("degenerate feature norm in tanh_normalize");
  const double scale = s1 / n;
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = std::tanh(scale * v[k]);
}

inline SaturatedVector tanh_normalize(std::span<const double> v, double s1) {
  require(s1 > 0.0, "s1 must be positive");
  RealVector out(v.size());
  tanh_normalize_into(v, s1, out);
  return SaturatedVector(std::move(out));
}

/// |a - b|_1 / l on raw spans.
inline double nhd_span(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("nhd_real: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return s / static_cast<double>(a.size());
}

inline double nhd_real(const SaturatedVector& a, const SaturatedVector& b) {
  return nhd_span(a.values(), b.values());
}

/// bit k = 1 iff v[k] >= 0 (zero quantizes to +1).
inline BitCode sign_quantize(std::span<const double> v) {
  BitCode code(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) code.set(k, v[k] >= 0.0);
  return code;
}

/// J^T * upstream for J the Jacobian of tanh_normalize at v.
inline void grad_tanh_normalize_into(std::span<const double> v, double s1,
                                     std::span<const double> upstream, std::span<double> out) {
  const double n = l2_norm(v);
  if (!(n > kNormEpsilon)) throw NumericError("degenerate feature norm in tanh_normalize");
  const double inv = 1.0 / n;
  // h = s1 * (1 - y^2) * g ; out = (h - u (u . h)) / |v|, u = v / |v|
  double uh = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double u = v[k] * inv;
    const double y = std::tanh(s1 * u);
    const double h = s1 * (1.0 - y * y) * upstream[k];
    out[k] = h;
    uh += u * h;
  }
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = (out[k] - v[k] * inv * uh) * inv;
}

inline RealVector grad_tanh_normalize(std::span<const double> v, double s1,
                                      std::span<const double> upstream) {
  require(v.size() == upstream.size(), "grad_tanh_normalize: length mismatch");
  RealVector out(v.size());
  grad_tanh_normalize_into(v, s1, upstream, out);
  return out;
}

}  // namespace crh

#endif  // CRH_FEATURE_SPACE_HPP
