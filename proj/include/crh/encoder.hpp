#ifndef CRH_ENCODER_HPP
#define CRH_ENCODER_HPP

// The toy encoder: global mean pooling plus collision-sensitive attention,
// concatenated and mapped to l outputs by one fully connected layer. Also the
// Adam optimizer used to train it.

#include <random>
#include <span>

#include "crh/common.hpp"
#include "crh/csa.hpp"

namespace crh {

struct EncoderParams {
  Matrix w_fc;      // l x 2C
  RealVector b;     // l
  RealVector w_att; // C

  std::size_t bits() const noexcept { return w_fc.rows(); }
  std::size_t channels() const noexcept { return w_att.size(); }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// Gaussian init with std 1/sqrt(2C) for w_fc and w_att, zero bias.
inline EncoderParams init_encoder(std::size_t bits, std::size_t channels, std::uint64_t seed) {
  require(bits >= 1 && channels >= 1, "encoder dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(2.0 * static_cast<double>(channels)));
  EncoderParams p{Matrix(bits, 2 * channels), RealVector(bits, 0.0), RealVector(channels)};
  for (double& x : p.w_fc.flat()) x = gauss(rng);
  for (double& x : p.w_att) x = gauss(rng);
  return p;
}

struct ForwardResult {
  RealVector g;      // mean-pooled global feature
  RealVector r;      // rarity per position
  RealVector alpha;  // attention weights
  RealVector a;      // attended feature
  RealVector z;      // [g; a]
  RealVector v;      // w_fc z + b
};

/// With use_attention = false the attended half is replaced by plain mean
/// pooling, i.e. the model sees global features only.
inline ForwardResult forward(const LocalFeatureMap& t, const EncoderParams& p,
                             bool use_attention = true) {
  check_prototype(t, p.w_att);
  require(p.w_fc.cols() == 2 * t.cols() && p.b.size() == p.w_fc.rows(),
          "encoder parameter shapes do not match the input");
  ForwardResult f;
  f.g = mean_pool(t);
  if (use_attention) {
    f.r = rarity(t, p.w_att);
    f.alpha = attention_map(f.r);
    f.a = attended_pool(t, f.alpha);
  } else {
    f.alpha.assign(t.rows(), 1.0 / static_cast<double>(t.rows()));
    f.a = f.g;
  }
  f.z = fuse(f.g, f.a);
  f.v = p.b;
  for (std::size_t k = 0; k < f.v.size(); ++k) f.v[k] += dot(p.w_fc.row(k), f.z);
  return f;
}

struct EncoderGrads {
  Matrix w_fc;
  RealVector b;
  RealVector w_att;

  explicit EncoderGrads(const EncoderParams& p)
      : w_fc(p.w_fc.rows(), p.w_fc.cols()), b(p.b.size(), 0.0), w_att(p.w_att.size(), 0.0) {}

  void add(const EncoderGrads& o, double scale = 1.0) {
    auto dst = w_fc.flat();
    auto src = o.w_fc.flat();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
    for (std::size_t k = 0; k < b.size(); ++k) b[k] += scale * o.b[k];
    for (std::size_t k = 0; k < w_att.size(); ++k) w_att[k] += scale * o.w_att[k];
  }
};

/// Accumulates the prototype gradient for an upstream gradient on z. Only the
/// attended half reaches a parameter.
inline void backward_from_z(const ForwardResult& f, const LocalFeatureMap& t,
                            const EncoderParams& p, std::span<const double> grad_z,
                            EncoderGrads& out, bool use_attention = true) {
  if (!use_attention) return;
  const std::size_t c = t.cols();
  const AttentionGrad ag = attention_backward(t, p.w_att, f.alpha, grad_z.subspan(c, c));
  for (std::size_t k = 0; k < c; ++k) out.w_att[k] += ag.grad_w[k];
}

/// Reverse pass for an upstream gradient on v.
inline EncoderGrads backward(const ForwardResult& f, const LocalFeatureMap& t,
                             const EncoderParams& p, std::span<const double> grad_v,
                             bool use_attention = true) {
  require(grad_v.size() == p.bits(), "backward: upstream length mismatch");
  EncoderGrads out(p);
  RealVector grad_z(f.z.size(), 0.0);
  for (std::size_t k = 0; k < grad_v.size(); ++k) {
    const double gk = grad_v[k];
    if (gk == 0.0) continue;
    out.b[k] = gk;
    auto wrow = p.w_fc.row(k);
    auto grow = out.w_fc.row(k);
    for (std::size_t j = 0; j < f.z.size(); ++j) {
      grow[j] = gk * f.z[j];
      grad_z[j] += gk * wrow[j];
    }
  }
  backward_from_z(f, t, p, grad_z, out, use_attention);
  return out;
}

// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moments for one parameter tensor.
struct AdamState {
  RealVector m;
  RealVector v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

inline void adam_step(AdamState& state, std::span<double> param, std::span<const double> grad,
                      const AdamConfig& cfg) {
  require(param.size() == grad.size() && state.m.size() == param.size(),
          "adam_step: shape mismatch");
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < param.size(); ++k) {
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * grad[k];
    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
    const double mhat = state.m[k] / c1;
    const double vhat = state.v[k] / c2;
    param[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

}  // namespace crh

#endif  // CRH_ENCODER_HPP
