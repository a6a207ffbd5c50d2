#ifndef CRH_CSA_HPP
#define CRH_CSA_HPP

// Collision-sensitive attention. A local feature map holds one C-dim feature
// per spatial position (rows = positions, cols = channels). Each position is
// scored by its L1 distance to a learnable prototype of common patterns, the
// scores go through a softmax, and the weighted features are pooled.

#include <span>

#include "crh/common.hpp"

namespace crh {

using LocalFeatureMap = Matrix;  // P x C

inline void check_prototype(const LocalFeatureMap& t, std::span<const double> w) {
  if (t.rows() < 1 || t.cols() < 1) throw DomainError("local feature map must be non-empty");
  if (w.size() != t.cols()) throw DomainError("prototype length does not match channel count");
}

/// r_p = |T_p - w|_1.
inline RealVector rarity(const LocalFeatureMap& t, std::span<const double> w) {
  check_prototype(t, w);
  RealVector r(t.rows());
  for (std::size_t p = 0; p < t.rows(); ++p) {
    auto tp = t.row(p);
    double s = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) s += std::abs(tp[c] - w[c]);
    r[p] = s;
  }
  return r;
}

/// Max-shifted softmax over rarity scores.
inline RealVector attention_map(std::span<const double> r) {
  require(!r.empty(), "attention_map: empty score vector");
  const double m = *std::max_element(r.begin(), r.end());
  RealVector alpha(r.size());
  double z = 0.0;
  for (std::size_t p = 0; p < r.size(); ++p) z += (alpha[p] = std::exp(r[p] - m));
  for (double& a : alpha) a /= z;
  return alpha;
}

/// sum_p alpha_p T_p.
inline RealVector attended_pool(const LocalFeatureMap& t, std::span<const double> alpha) {
  if (alpha.size() != t.rows()) throw DomainError("attended_pool: weight count mismatch");
  RealVector a(t.cols(), 0.0);
  for (std::size_t p = 0; p < t.rows(); ++p) {
    auto tp = t.row(p);
    for (std::size_t c = 0; c < t.cols(); ++c) a[c] += alpha[p] * tp[c];
  }
  return a;
}

inline RealVector mean_pool(const LocalFeatureMap& t) {
  RealVector g(t.cols(), 0.0);
  for (std::size_t p = 0; p < t.rows(); ++p) {
    auto tp = t.row(p);
    for (std::size_t c = 0; c < t.cols(); ++c) g[c] += tp[c];
  }
  for (double& x : g) x /= static_cast<double>(t.rows());
  return g;
}

/// [global; attended].
inline RealVector fuse(std::span<const double> global, std::span<const double> attended) {
  if (global.size() != attended.size()) throw DomainError("fuse: length mismatch");
  RealVector z(global.begin(), global.end());
  z.insert(z.end(), attended.begin(), attended.end());
  return z;
}

struct AttentionGrad {
  RealVector grad_w;  // d/d prototype
  Matrix grad_t;      // d/d local features, both through pooling and scoring
};

/// Reverse pass of rarity -> attention_map -> attended_pool for an upstream
/// gradient on the pooled vector.
inline AttentionGrad attention_backward(const LocalFeatureMap& t, std::span<const double> w,
                                        std::span<const double> alpha,
                                        std::span<const double> upstream) {
  check_prototype(t, w);
  require(upstream.size() == t.cols() && alpha.size() == t.rows(),
          "attention_backward: shape mismatch");
  const std::size_t npos = t.rows(), nch = t.cols();
  AttentionGrad out{RealVector(nch, 0.0), Matrix(npos, nch)};

  RealVector d_alpha(npos);
  double mean_d = 0.0;
  for (std::size_t p = 0; p < npos; ++p) {
    d_alpha[p] = dot(upstream, t.row(p));
    mean_d += alpha[p] * d_alpha[p];
  }
  for (std::size_t p = 0; p < npos; ++p) {
    const double d_r = alpha[p] * (d_alpha[p] - mean_d);
    auto tp = t.row(p);
    auto gp = out.grad_t.row(p);
    for (std::size_t c = 0; c < nch; ++c) {
      const double sg = sign0(tp[c] - w[c]);
      gp[c] = alpha[p] * upstream[c] + d_r * sg;
      out.grad_w[c] -= d_r * sg;
    }
  }
  return out;
}

}  // namespace crh

#endif  // CRH_CSA_HPP
