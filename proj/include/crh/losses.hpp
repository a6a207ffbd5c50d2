#ifndef CRH_LOSSES_HPP
#define CRH_LOSSES_HPP

// Training objectives as value-plus-gradient computations:
//   * the NHD softmax loss over a memory bank, and its pseudo-label twin over
//     a cluster memory,
//   * the single-view dot-product baseline,
//   * the prototype attention loss,
//   * their weighted total.
// The distance-level gradients of the NHD loss are exposed separately so the
// sign facts about them can be checked directly.

#include <span>
#include <vector>

#include "crh/common.hpp"
#include "crh/csa.hpp"
#include "crh/feature_space.hpp"

namespace crh {

/// Learnable per-instance memory, one row per training sample.
struct MemoryBank {
  Matrix rows;  // N x l

  friend bool operator==(const MemoryBank&, const MemoryBank&) = default;
};

/// Learnable per-cluster memory plus the sample -> cluster assignment.
struct ClusterMemory {
  Matrix rows;                            // n_c x l
  std::vector<std::uint32_t> assignment;  // length N, entries < n_c

  std::size_t clusters() const noexcept { return rows.rows(); }

  friend bool operator==(const ClusterMemory&, const ClusterMemory&) = default;
};

struct LossOutput {
  double value = 0.0;
  RealVector grad_v;
  Matrix grad_bank;  // same shape as the consulted memory
};

// ---------------------------------------------------------------------------
// Distance level.
//
// With z+ = s (2 - d_ii)^2 / 4, z_j = s (1 - d_ij)^2 and Z = e^{z+} + sum_j e^{z_j},
// the loss is log Z - z+.

struct NhdDistanceTerms {
  double value = 0.0;
  double d_positive = 0.0;  // dL/dd_ii
  RealVector d_negative;    // dL/dd_ij, one per negative
};

inline NhdDistanceTerms nhd_distance_terms(double d_ii, std::span<const double> d_neg, double s) {
  const double z_pos = s * (2.0 - d_ii) * (2.0 - d_ii) / 4.0;
  RealVector z_neg(d_neg.size());
  double m = z_pos;
  for (std::size_t j = 0; j < d_neg.size(); ++j) {
    z_neg[j] = s * (1.0 - d_neg[j]) * (1.0 - d_neg[j]);
    m = std::max(m, z_neg[j]);
  }
  const double e_pos = std::exp(z_pos - m);
  double neg_sum = 0.0;
  for (double& z : z_neg) neg_sum += (z = std::exp(z - m));
  const double total = e_pos + neg_sum;

  NhdDistanceTerms out;
  // (m - z+) >= 0 and total >= 1, so the value is non-negative by construction.
  out.value = (m - z_pos) + std::log(total);
  out.d_positive = (neg_sum / total) * (s / 2.0) * (2.0 - d_ii);
  out.d_negative.resize(d_neg.size());
  for (std::size_t j = 0; j < d_neg.size(); ++j)
    out.d_negative[j] = (z_neg[j] / total) * 2.0 * s * (d_neg[j] - 1.0);
  return out;
}

inline double loss_nhd_from_distances(double d_ii, std::span<const double> d_neg, double s) {
  return nhd_distance_terms(d_ii, d_neg, s).value;
}

/// dL/dd_ii with the negative distances held fixed. Never negative.
inline double loss_nhd_ddii(double d_ii, std::span<const double> d_neg, double s) {
  return nhd_distance_terms(d_ii, d_neg, s).d_positive;
}

/// dL/dd_ij for the j-th negative. Same sign as d_ij - 1.
inline double loss_nhd_ddij(double d_ii, std::span<const double> d_neg, std::size_t j, double s) {
  require(j < d_neg.size(), "loss_nhd_ddij: negative index out of range");
  return nhd_distance_terms(d_ii, d_neg, s).d_negative[j];
}

// ---------------------------------------------------------------------------
// Saturated level: everything after tanh_normalize. Used directly by the
// trainer, which normalizes each memory row once per step.

struct SaturatedNhdTerms {
  double value = 0.0;
  RealVector grad_vhat;  // dL/dvhat
  RealVector coef;       // dL/dd_j for every memory row j (positive included)
};

/// Softmax NHD loss of one saturated feature against a normalized memory.
/// Row `positive` is the positive target and every other row a negative.
inline SaturatedNhdTerms nhd_softmax_saturated(std::span<const double> vhat,
                                               const Matrix& memory_hat, std::size_t positive,
                                               double s) {
  const std::size_t rows = memory_hat.rows(), l = vhat.size();
  require(positive < rows, "positive index out of range");
  require(memory_hat.cols() == l, "memory width does not match feature length");

  RealVector dist(rows);
  for (std::size_t j = 0; j < rows; ++j) dist[j] = nhd_span(vhat, memory_hat.row(j));

  RealVector d_neg;
  d_neg.reserve(rows - 1);
  for (std::size_t j = 0; j < rows; ++j)
    if (j != positive) d_neg.push_back(dist[j]);
  const NhdDistanceTerms terms = nhd_distance_terms(dist[positive], d_neg, s);

  SaturatedNhdTerms out;
  out.value = terms.value;
  out.coef.resize(rows);
  for (std::size_t j = 0, q = 0; j < rows; ++j)
    out.coef[j] = j == positive ? terms.d_positive : terms.d_negative[q++];

  out.grad_vhat.assign(l, 0.0);
  const double inv_l = 1.0 / static_cast<double>(l);
  for (std::size_t j = 0; j < rows; ++j) {
    const double c = out.coef[j] * inv_l;
    if (c == 0.0) continue;
    auto w = memory_hat.row(j);
    for (std::size_t k = 0; k < l; ++k) out.grad_vhat[k] += c * sign0(vhat[k] - w[k]);
  }
  return out;
}

inline Matrix normalize_rows(const Matrix& m, double s1) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t j = 0; j < m.rows(); ++j) {
    try {
      tanh_normalize_into(m.row(j), s1, out.row(j));
    } catch (const NumericError&) {
      throw NumericError("degenerate memory row norm", j);
    }
  }
  return out;
}

namespace detail {

inline LossOutput nhd_loss_against(std::span<const double> v, const Matrix& memory,
                                   std::size_t positive, double s, double s1) {
  require(s > 0.0 && s1 > 0.0, "scale parameters must be positive");
  require(memory.cols() == v.size(), "memory width does not match feature length");
  const Matrix memory_hat = normalize_rows(memory, s1);
  const SaturatedVector vhat = tanh_normalize(v, s1);
  const SaturatedNhdTerms t = nhd_softmax_saturated(vhat.values(), memory_hat, positive, s);

  LossOutput out;
  out.value = t.value;
  out.grad_v = grad_tanh_normalize(v, s1, t.grad_vhat);
  out.grad_bank = Matrix(memory.rows(), memory.cols());
  const double inv_l = 1.0 / static_cast<double>(v.size());
  RealVector up(v.size());
  for (std::size_t j = 0; j < memory.rows(); ++j) {
    auto w = memory_hat.row(j);
    for (std::size_t k = 0; k < v.size(); ++k)
      up[k] = -t.coef[j] * inv_l * sign0(vhat[k] - w[k]);
    grad_tanh_normalize_into(memory.row(j), s1, up, out.grad_bank.row(j));
  }
  return out;
}

}  // namespace detail

/// NHD softmax loss for sample i against the whole memory bank.
inline LossOutput loss_nhd(std::span<const double> v_i, std::size_t i, const MemoryBank& bank,
                           double s, double s1) {
  if (i >= bank.rows.rows()) throw DomainError("loss_nhd: sample index out of range");
  return detail::nhd_loss_against(v_i, bank.rows, i, s, s1);
}

/// Same objective with the cluster memory standing in for the bank.
inline LossOutput loss_pseudo(std::span<const double> v_i, std::size_t cluster,
                              const ClusterMemory& memory, double s, double s1) {
  if (cluster >= memory.clusters()) throw DomainError("loss_pseudo: cluster index out of range");
  return detail::nhd_loss_against(v_i, memory.rows, cluster, s, s1);
}

/// Single-view dot-product baseline: softmax over s * tanh(W_j) . tanh(v_i),
/// no normalization.
inline LossOutput loss_l2_singleview(std::span<const double> v_i, std::size_t i,
                                     const MemoryBank& bank, double s) {
  const Matrix& w = bank.rows;
  const std::size_t rows = w.rows(), l = v_i.size();
  if (i >= rows) throw DomainError("loss_l2_singleview: sample index out of range");
  require(w.cols() == l, "memory width does not match feature length");

  RealVector tv(l);
  for (std::size_t k = 0; k < l; ++k) tv[k] = std::tanh(v_i[k]);
  Matrix tw(rows, l);
  RealVector logits(rows);
  for (std::size_t j = 0; j < rows; ++j) {
    auto src = w.row(j);
    auto dst = tw.row(j);
    for (std::size_t k = 0; k < l; ++k) dst[k] = std::tanh(src[k]);
    logits[j] = s * dot(dst, tv);
  }
  const double lse = log_sum_exp(logits);

  LossOutput out;
  out.value = std::max(0.0, lse - logits[i]);
  out.grad_v.assign(l, 0.0);
  out.grad_bank = Matrix(rows, l);
  for (std::size_t j = 0; j < rows; ++j) {
    const double c = std::exp(logits[j] - lse) - (j == i ? 1.0 : 0.0);
    auto twj = tw.row(j);
    auto gw = out.grad_bank.row(j);
    for (std::size_t k = 0; k < l; ++k) {
      out.grad_v[k] += c * s * twj[k];
      gw[k] = c * s * tv[k] * (1.0 - twj[k] * twj[k]);
    }
  }
  for (std::size_t k = 0; k < l; ++k) out.grad_v[k] *= 1.0 - tv[k] * tv[k];
  return out;
}

struct AttentionLossOutput {
  double value = 0.0;
  RealVector grad_w_att;
  Matrix grad_t;
};

/// sum_p |T_p - w_att|_1 with sign(0) = 0 subgradients.
inline AttentionLossOutput loss_attention(const LocalFeatureMap& t, std::span<const double> w_att) {
  check_prototype(t, w_att);
  AttentionLossOutput out{0.0, RealVector(w_att.size(), 0.0), Matrix(t.rows(), t.cols())};
  for (std::size_t p = 0; p < t.rows(); ++p) {
    auto tp = t.row(p);
    auto gp = out.grad_t.row(p);
    for (std::size_t c = 0; c < w_att.size(); ++c) {
      const double diff = tp[c] - w_att[c];
      out.value += std::abs(diff);
      gp[c] = sign0(diff);
      out.grad_w_att[c] -= sign0(diff);
    }
  }
  return out;
}

struct TotalLoss {
  double value = 0.0;
  RealVector grad_v;
  Matrix grad_bank;
  Matrix grad_cluster;
  RealVector grad_w_att;
};

inline double total_loss_value(double nhd, double pseudo, double att, double lambda_pseudo,
                               double lambda_att) {
  if (lambda_pseudo < 0.0 || lambda_att < 0.0) throw DomainError("loss weights must be >= 0");
  return nhd + lambda_pseudo * pseudo + lambda_att * att;
}

/// L = L_nhd + lambda_pseudo L_pseudo + lambda_att L_att, gradients combined
/// the same way. Pass default-constructed parts for absent terms.
inline TotalLoss total_loss(const LossOutput& nhd, const LossOutput& pseudo,
                            const AttentionLossOutput& att, double lambda_pseudo,
                            double lambda_att) {
  TotalLoss out;
  out.value = total_loss_value(nhd.value, pseudo.value, att.value, lambda_pseudo, lambda_att);
  out.grad_v = nhd.grad_v;
  if (!pseudo.grad_v.empty()) {
    require(pseudo.grad_v.size() == out.grad_v.size(), "total_loss: feature length mismatch");
    for (std::size_t k = 0; k < out.grad_v.size(); ++k)
      out.grad_v[k] += lambda_pseudo * pseudo.grad_v[k];
  }
  out.grad_bank = nhd.grad_bank;
  out.grad_cluster = pseudo.grad_bank;
  for (double& g : out.grad_cluster.flat()) g *= lambda_pseudo;
  out.grad_w_att = att.grad_w_att;
  for (double& g : out.grad_w_att) g *= lambda_att;
  return out;
}

}  // namespace crh

#endif  // CRH_LOSSES_HPP
