#ifndef CRH_GRADCHECK_HPP
#define CRH_GRADCHECK_HPP

// Central finite-difference checks of every analytic gradient in the library,
// run on seeded random small instances. Used by the `gradcheck` command.

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "crh/codebook.hpp"
#include "crh/common.hpp"
#include "crh/csa.hpp"
#include "crh/encoder.hpp"
#include "crh/feature_space.hpp"
#include "crh/losses.hpp"

namespace crh {

struct GradcheckOptions {
  std::size_t instances = 100;
  double h = 1e-5;
  double tolerance = 1e-4;
  // Instances with an L1 argument closer than this to zero are redrawn.
  double kink_margin = 1e-3;
  std::uint64_t seed = 0;
};

struct GradcheckResult {
  std::string name;
  std::size_t instances = 0;
  double max_rel_error = 0.0;
  std::size_t worst_instance = 0;
  double tolerance = 0.0;

  bool passed() const { return max_rel_error < tolerance; }
};

/// max|a - n| / max(max|a|, max|n|, floor). The floor keeps an exactly zero
/// gradient from being judged against pure rounding noise.
inline double relative_error(std::span<const double> analytic, std::span<const double> numeric,
                             double floor = 1e-6) {
  require(analytic.size() == numeric.size(), "relative_error: length mismatch");
  double diff = 0.0, scale = floor;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    diff = std::max(diff, std::abs(analytic[k] - numeric[k]));
    scale = std::max({scale, std::abs(analytic[k]), std::abs(numeric[k])});
  }
  return diff / scale;
}

/// Central differences of f with respect to every entry of x. x is restored.
inline RealVector central_difference(const std::function<double()>& f, std::span<double> x,
                                     double h) {
  RealVector g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = x[k];
    x[k] = keep + h;
    const double up = f();
    x[k] = keep - h;
    const double down = f();
    x[k] = keep;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

namespace detail {

class InstanceRng {
 public:
  explicit InstanceRng(std::uint64_t seed) : rng_(seed) {}
  double normal() { return gauss_(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  RealVector vec(std::size_t n) {
    RealVector v(n);
    for (double& x : v) x = normal();
    return v;
  }
  Matrix mat(std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& x : m.flat()) x = normal();
    return m;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

inline bool l1_clear(std::span<const double> a, std::span<const double> b, double margin) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::abs(a[k] - b[k]) < margin) return false;
  return true;
}

inline bool nhd_clear(std::span<const double> v, const Matrix& memory, double s1, double margin) {
  const SaturatedVector vh = tanh_normalize(v, s1);
  const Matrix mh = normalize_rows(memory, s1);
  for (std::size_t j = 0; j < mh.rows(); ++j)
    if (!l1_clear(vh.values(), mh.row(j), margin)) return false;
  return true;
}

inline bool map_clear(const LocalFeatureMap& t, std::span<const double> w, double margin) {
  for (std::size_t p = 0; p < t.rows(); ++p)
    if (!l1_clear(t.row(p), w, margin)) return false;
  return true;
}

/// Runs `trial` on fresh instance seeds until it accepts one (returns >= 0).
template <typename Trial>
GradcheckResult run_check(const std::string& name, const GradcheckOptions& opt, std::uint64_t tag,
                          Trial&& trial) {
  GradcheckResult res{name, 0, 0.0, 0, opt.tolerance};
  std::uint64_t draw = 0;
  while (res.instances < opt.instances) {
    InstanceRng rng(derive_seed(derive_seed(opt.seed, tag), draw++));
    const double err = trial(rng);
    if (err < 0.0) {
      if (draw > 100 * opt.instances) throw NumericError("gradcheck: too many kink redraws in " + name);
      continue;
    }
    if (res.instances == 0 || err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_instance = res.instances;
    }
    ++res.instances;
  }
  return res;
}

/// Frozen-target DEC objective, for checking the gradient that treats p as constant.
inline double dec_frozen(const Matrix& z, const CodebookSet& cb, const std::vector<double>& p) {
  double value = 0.0;
  const std::size_t n = z.rows();
  for (std::size_t k = 0; k < cb.bits(); ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d0 = l2_distance(z.row(j), cb.mu0.row(k));
      const double d1 = l2_distance(z.row(j), cb.mu1.row(k));
      const double u0 = 1.0 / (1.0 + d0 * d0), u1 = 1.0 / (1.0 + d1 * d1);
      const double q[2] = {u0 / (u0 + u1), u1 / (u0 + u1)};
      for (int c = 0; c < 2; ++c) {
        const double pc = p[(k * n + j) * 2 + c];
        if (pc > 0.0) value += pc * std::log(pc / q[c]);
      }
    }
  }
  return value / static_cast<double>(cb.bits());
}

inline std::vector<double> dec_targets(const Matrix& z, const CodebookSet& cb) {
  const std::size_t n = z.rows();
  std::vector<double> p(cb.bits() * n * 2);
  for (std::size_t k = 0; k < cb.bits(); ++k) {
    std::vector<double> q(2 * n);
    double f[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      const double d0 = l2_distance(z.row(j), cb.mu0.row(k));
      const double d1 = l2_distance(z.row(j), cb.mu1.row(k));
      const double u0 = 1.0 / (1.0 + d0 * d0), u1 = 1.0 / (1.0 + d1 * d1);
      q[2 * j] = u0 / (u0 + u1);
      q[2 * j + 1] = u1 / (u0 + u1);
      f[0] += q[2 * j];
      f[1] += q[2 * j + 1];
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double a = q[2 * j] * q[2 * j] / f[0], b = q[2 * j + 1] * q[2 * j + 1] / f[1];
      p[(k * n + j) * 2] = a / (a + b);
      p[(k * n + j) * 2 + 1] = b / (a + b);
    }
  }
  return p;
}

inline RealVector concat(std::initializer_list<std::span<const double>> parts) {
  RealVector out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace detail

inline std::vector<GradcheckResult> run_gradchecks(const GradcheckOptions& opt = {}) {
  using detail::InstanceRng;
  const double h = opt.h, margin = opt.kink_margin;
  std::vector<GradcheckResult> out;

  out.push_back(detail::run_check("tanh_normalize", opt, 1, [&](InstanceRng& rng) {
    const std::size_t l = rng.index(2, 8);
    RealVector v = rng.vec(l);
    const RealVector up = rng.vec(l);
    const double s1 = rng.uniform(0.5, 8.0);
    const RealVector a = grad_tanh_normalize(v, s1, up);
    const RealVector n = central_difference([&] { return dot(tanh_normalize(v, s1).values(), up); }, v, h);
    return relative_error(a, n);
  }));

  auto memory_check = [&](bool pseudo) {
    return [&, pseudo](InstanceRng& rng) -> double {
      const std::size_t l = rng.index(2, 8), rows = rng.index(pseudo ? 1 : 2, 16);
      RealVector v = rng.vec(l);
      Matrix mem = rng.mat(rows, l);
      const std::size_t pos = rng.index(0, rows - 1);
      const double s = rng.uniform(1.0, 8.0), s1 = rng.uniform(0.5, 4.0);
      if (!detail::nhd_clear(v, mem, s1, margin)) return -1.0;
      auto value = [&] {
        if (pseudo) {
          ClusterMemory cm{mem, {}};
          return loss_pseudo(v, pos, cm, s, s1).value;
        }
        return loss_nhd(v, pos, MemoryBank{mem}, s, s1).value;
      };
      LossOutput lo = pseudo ? loss_pseudo(v, pos, ClusterMemory{mem, {}}, s, s1)
                             : loss_nhd(v, pos, MemoryBank{mem}, s, s1);
      const RealVector nv = central_difference(value, v, h);
      const RealVector nb = central_difference(value, mem.flat(), h);
      return std::max(relative_error(lo.grad_v, nv), relative_error(lo.grad_bank.flat(), nb));
    };
  };
  out.push_back(detail::run_check("loss_nhd", opt, 2, memory_check(false)));
  out.push_back(detail::run_check("loss_pseudo", opt, 3, memory_check(true)));

  out.push_back(detail::run_check("loss_l2_singleview", opt, 4, [&](InstanceRng& rng) {
    const std::size_t l = rng.index(2, 8), rows = rng.index(1, 16);
    RealVector v = rng.vec(l);
    MemoryBank bank{rng.mat(rows, l)};
    const std::size_t i = rng.index(0, rows - 1);
    const double s = rng.uniform(1.0, 8.0);
    const LossOutput lo = loss_l2_singleview(v, i, bank, s);
    auto value = [&] { return loss_l2_singleview(v, i, bank, s).value; };
    const RealVector nv = central_difference(value, v, h);
    const RealVector nb = central_difference(value, bank.rows.flat(), h);
    return std::max(relative_error(lo.grad_v, nv), relative_error(lo.grad_bank.flat(), nb));
  }));

  out.push_back(detail::run_check("loss_attention", opt, 5, [&](InstanceRng& rng) {
    const std::size_t c = rng.index(1, 4), p = rng.index(1, 6);
    const LocalFeatureMap t = rng.mat(p, c);
    RealVector w = rng.vec(c);
    if (!detail::map_clear(t, w, margin)) return -1.0;
    const AttentionLossOutput lo = loss_attention(t, w);
    const RealVector nw = central_difference([&] { return loss_attention(t, w).value; }, w, h);
    // Rounding in a sum of P*C magnitudes scales with the value itself.
    return relative_error(lo.grad_w_att, nw, 1e-6 * std::max(1.0, lo.value));
  }));

  out.push_back(detail::run_check("csa_pool", opt, 6, [&](InstanceRng& rng) {
    const std::size_t c = rng.index(1, 4), p = rng.index(1, 6);
    LocalFeatureMap t = rng.mat(p, c);
    RealVector w = rng.vec(c);
    const RealVector up = rng.vec(c);
    if (!detail::map_clear(t, w, margin)) return -1.0;
    auto value = [&] { return dot(attended_pool(t, attention_map(rarity(t, w))), up); };
    const AttentionGrad ag = attention_backward(t, w, attention_map(rarity(t, w)), up);
    const RealVector nw = central_difference(value, w, h);
    const RealVector nt = central_difference(value, t.flat(), h);
    return std::max(relative_error(ag.grad_w, nw), relative_error(ag.grad_t.flat(), nt));
  }));

  out.push_back(detail::run_check("encoder_loss_nhd", opt, 7, [&](InstanceRng& rng) {
    const std::size_t c = rng.index(1, 4), p = rng.index(1, 6), l = rng.index(2, 8);
    const std::size_t rows = rng.index(2, 8);
    const LocalFeatureMap t = rng.mat(p, c);
    EncoderParams ep{rng.mat(l, 2 * c), rng.vec(l), rng.vec(c)};
    const MemoryBank bank{rng.mat(rows, l)};
    const std::size_t i = rng.index(0, rows - 1);
    const double s = rng.uniform(1.0, 8.0), s1 = rng.uniform(0.5, 4.0);
    if (!detail::map_clear(t, ep.w_att, margin)) return -1.0;
    const ForwardResult f = forward(t, ep);
    if (!detail::nhd_clear(f.v, bank.rows, s1, margin)) return -1.0;
    const LossOutput lo = loss_nhd(f.v, i, bank, s, s1);
    const EncoderGrads g = backward(f, t, ep, lo.grad_v);
    auto value = [&] { return loss_nhd(forward(t, ep).v, i, bank, s, s1).value; };
    const RealVector a = detail::concat({g.w_fc.flat(), g.b, g.w_att});
    const RealVector n = detail::concat({central_difference(value, ep.w_fc.flat(), h),
                                         central_difference(value, ep.b, h),
                                         central_difference(value, ep.w_att, h)});
    return relative_error(a, n);
  }));

  out.push_back(detail::run_check("codebook_deltas", opt, 8, [&](InstanceRng& rng) {
    const std::size_t d = rng.index(1, 8), l = rng.index(1, 8);
    RealVector z = rng.vec(d);
    CodebookSet cb{rng.mat(l, d), rng.mat(l, d)};
    const RealVector up = rng.vec(l);
    const DeltasGrad g = deltas_backward(z, cb, up);
    auto value = [&] { return dot(deltas(z, cb), up); };
    const RealVector a = detail::concat({g.z, g.mu0.flat(), g.mu1.flat()});
    const RealVector n = detail::concat({central_difference(value, z, h),
                                         central_difference(value, cb.mu0.flat(), h),
                                         central_difference(value, cb.mu1.flat(), h)});
    return relative_error(a, n);
  }));

  out.push_back(detail::run_check("dec_loss", opt, 9, [&](InstanceRng& rng) {
    const std::size_t d = rng.index(1, 6), l = rng.index(1, 6), n = rng.index(1, 8);
    Matrix z = rng.mat(n, d);
    CodebookSet cb{rng.mat(l, d), rng.mat(l, d)};
    const DecLossOutput lo = dec_loss(z, cb);
    const std::vector<double> p = detail::dec_targets(z, cb);
    auto value = [&] { return detail::dec_frozen(z, cb, p); };
    const RealVector a = detail::concat({lo.grad_z.flat(), lo.grad_mu0.flat(), lo.grad_mu1.flat()});
    const RealVector num = detail::concat({central_difference(value, z.flat(), h),
                                           central_difference(value, cb.mu0.flat(), h),
                                           central_difference(value, cb.mu1.flat(), h)});
    return relative_error(a, num);
  }));

  out.push_back(detail::run_check("nhd_distance_partials", opt, 10, [&](InstanceRng& rng) {
    const std::size_t m = rng.index(1, 12);
    double d_ii = rng.uniform(0.0, 2.0);
    RealVector d_neg(m);
    for (double& x : d_neg) x = rng.uniform(0.0, 2.0);
    const double s = rng.uniform(1.0, 8.0);
    RealVector a{loss_nhd_ddii(d_ii, d_neg, s)};
    for (std::size_t j = 0; j < m; ++j) a.push_back(loss_nhd_ddij(d_ii, d_neg, j, s));
    auto value = [&] { return loss_nhd_from_distances(d_ii, d_neg, s); };
    RealVector n = central_difference(value, std::span<double>(&d_ii, 1), h);
    const RealVector nn = central_difference(value, d_neg, h);
    n.insert(n.end(), nn.begin(), nn.end());
    return relative_error(a, n);
  }));

  return out;
}

}  // namespace crh

#endif  // CRH_GRADCHECK_HPP
