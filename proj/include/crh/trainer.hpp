#ifndef CRH_TRAINER_HPP
#define CRH_TRAINER_HPP

// End-to-end training of the encoder, memory bank, cluster memory and (for the
// codebook variant) the per-bit centroids, plus inference and the model file.
//
// One optimizer step over a minibatch B:
//   1. normalize every memory row once,
//   2. per sample: forward, surrogate x (v, or the codebook deltas), losses
//      and the sample's coefficients dL/dd_ij against every memory row,
//   3. reduce parameter gradients in sample order, and memory gradients row
//      by row in sample order, all scaled by 1/|B|,
//   4. one Adam step per tensor.
// The reduction order never depends on the thread count.

#include <cstdint>
#include <functional>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "crh/codebook.hpp"
#include "crh/common.hpp"
#include "crh/encoder.hpp"
#include "crh/evaluation.hpp"
#include "crh/feature_space.hpp"
#include "crh/hamming.hpp"
#include "crh/losses.hpp"
#include "crh/pseudo_labels.hpp"
#include "crh/synthdata.hpp"

namespace crh {

enum class LossMode { nhd_full, nhd_only, l2_baseline };
enum class Variant : std::uint8_t { sign = 0, codebook = 1 };

inline const char* to_string(LossMode m) {
  switch (m) {
    case LossMode::nhd_full: return "nhd_full";
    case LossMode::nhd_only: return "nhd_only";
    case LossMode::l2_baseline: return "l2_baseline";
  }
  return "?";
}
inline const char* to_string(Variant v) { return v == Variant::sign ? "sign" : "codebook"; }

struct TrainConfig {
  std::size_t bits = 16;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double s = 8.0;
  double s1 = 8.0;
  double lambda_nhd = 1.0;
  double lambda_pseudo = 1.0;
  double lambda_att = 1.0;
  double lambda_code = 1.0;
  std::size_t pseudo_refresh_epochs = 5;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::nhd_full;
  Variant variant = Variant::sign;
  bool use_attention = true;
  // Noise added to the anchor sample before the loss; 0 feeds the clean sample.
  double anchor_sigma = 0.0;
  APConfig ap;
  AdamConfig adam;

  void validate() const {
    if (epochs < 1) throw DomainError("epochs must be >= 1");
    if (batch_size < 1) throw DomainError("batch size must be >= 1");
    if (bits < 1 || bits > kMaxBits) throw DomainError("bits must be in [1, 4096]");
    if (!(s > 0.0 && s1 > 0.0)) throw DomainError("scale parameters must be > 0");
    if (lambda_nhd < 0.0 || lambda_pseudo < 0.0 || lambda_att < 0.0 || lambda_code < 0.0)
      throw DomainError("loss weights must be >= 0");
    if (lr < 0.0) throw DomainError("learning rate must be >= 0");
    if (pseudo_refresh_epochs < 1) throw DomainError("pseudo refresh period must be >= 1");
    if (anchor_sigma < 0.0) throw DomainError("anchor sigma must be >= 0");
    ap.validate();
  }

  bool pseudo_active() const { return loss_mode == LossMode::nhd_full && lambda_pseudo > 0.0; }
  bool attention_loss_active() const {
    return loss_mode == LossMode::nhd_full && lambda_att > 0.0 && use_attention;
  }
  bool code_loss_active() const {
    return variant == Variant::codebook && loss_mode == LossMode::nhd_full && lambda_code > 0.0;
  }
  double nhd_weight() const { return loss_mode == LossMode::l2_baseline ? 0.0 : lambda_nhd; }
};

struct ModelState {
  Variant variant = Variant::sign;
  bool use_attention = true;
  EncoderParams params;
  MemoryBank bank;
  std::optional<ClusterMemory> pseudo;
  std::optional<CodebookSet> codebooks;

  AdamState opt_w_fc, opt_b, opt_w_att, opt_bank, opt_pseudo, opt_mu0, opt_mu1;
  std::uint32_t epoch = 0;
  std::uint64_t seed = 0;

  std::size_t bits() const { return params.bits(); }
  std::size_t channels() const { return params.channels(); }

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double mean_norm_v = 0.0;
  double p_collision = 0.0;
  double map = NAN;            // NaN when the dataset is unlabeled
  double mean_abs_vhat = 0.0;  // mean |component| of tanh(s1 v / |v|)
  double mean_dii = 0.0;       // mean NHD between a sample and its bank row
  std::size_t clusters = 0;    // pseudo classes in use (0 when inactive)
};

struct TrainResult {
  ModelState state;
  std::vector<EpochMetrics> log;
};

// ---------------------------------------------------------------------------

namespace detail {

/// Per-sample forward result in the space the losses see.
struct Representation {
  ForwardResult f;
  RealVector x;  // v for the sign variant, codebook deltas otherwise
};

inline Representation represent(const LocalFeatureMap& t, const ModelState& st) {
  Representation r{forward(t, st.params, st.use_attention), {}};
  r.x = st.variant == Variant::sign ? r.f.v : deltas(r.f.z, *st.codebooks);
  return r;
}

inline BitCode code_of(const Representation& r, const ModelState& st) {
  return st.variant == Variant::sign ? sign_quantize(r.x) : codebook_encode(r.f.z, *st.codebooks);
}

struct SampleWork {
  double loss = 0.0;
  Representation rep;
  RealVector partner;     // xhat (NHD modes) or tanh(x) (dot-product baseline)
  RealVector coef_bank;   // dL/d(score against bank row j)
  RealVector coef_pseudo; // same against cluster rows
  RealVector grad_x;
  std::optional<EncoderGrads> grads;
  std::optional<DeltasGrad> cb_grads;
  LocalFeatureMap input;
};

struct StepContext {
  const Dataset& data;
  const TrainConfig& cfg;
  const ModelState& st;
  Matrix bank_hat;    // tanh_normalize rows, or plain tanh for the baseline
  Matrix pseudo_hat;
};

inline StepContext make_context(const Dataset& data, const TrainConfig& cfg, const ModelState& st) {
  StepContext ctx{data, cfg, st, {}, {}};
  if (cfg.loss_mode == LossMode::l2_baseline) {
    ctx.bank_hat = st.bank.rows;
    for (double& x : ctx.bank_hat.flat()) x = std::tanh(x);
  } else if (cfg.nhd_weight() > 0.0) {
    ctx.bank_hat = normalize_rows(st.bank.rows, cfg.s1);
  }
  if (cfg.pseudo_active() && st.pseudo) ctx.pseudo_hat = normalize_rows(st.pseudo->rows, cfg.s1);
  return ctx;
}

inline std::uint64_t anchor_seed(const TrainConfig& cfg, std::size_t epoch, std::size_t i) {
  return derive_seed(derive_seed(cfg.seed, seed_tag::kAugment), (epoch << 32) ^ i);
}

inline SampleWork compute_sample(const StepContext& ctx, std::size_t i, std::size_t epoch,
                                 bool with_grads) {
  const TrainConfig& cfg = ctx.cfg;
  const ModelState& st = ctx.st;
  SampleWork w;
  w.input = cfg.anchor_sigma > 0.0
                ? augment(ctx.data.samples[i], cfg.anchor_sigma, anchor_seed(cfg, epoch, i))
                : ctx.data.samples[i];
  w.rep = represent(w.input, st);
  const RealVector& x = w.rep.x;
  const std::size_t l = x.size();
  w.grad_x.assign(l, 0.0);

  if (cfg.loss_mode == LossMode::l2_baseline) {
    const Matrix& tw = ctx.bank_hat;
    w.partner.resize(l);
    for (std::size_t k = 0; k < l; ++k) w.partner[k] = std::tanh(x[k]);
    RealVector logits(tw.rows());
    for (std::size_t j = 0; j < tw.rows(); ++j) logits[j] = cfg.s * dot(tw.row(j), w.partner);
    const double lse = log_sum_exp(logits);
    w.loss = std::max(0.0, lse - logits[i]);
    w.coef_bank.resize(tw.rows());
    for (std::size_t j = 0; j < tw.rows(); ++j) {
      const double c = std::exp(logits[j] - lse) - (j == i ? 1.0 : 0.0);
      w.coef_bank[j] = c;
      auto twj = tw.row(j);
      for (std::size_t k = 0; k < l; ++k) w.grad_x[k] += c * cfg.s * twj[k];
    }
    for (std::size_t k = 0; k < l; ++k) w.grad_x[k] *= 1.0 - w.partner[k] * w.partner[k];
  } else {
    w.partner.resize(l);
    try {
      tanh_normalize_into(x, cfg.s1, w.partner);
    } catch (const NumericError&) {
      throw NumericError("degenerate feature norm", i);
    }
    RealVector grad_hat(l, 0.0);
    const double wn = cfg.nhd_weight();
    if (wn > 0.0) {
      SaturatedNhdTerms t = nhd_softmax_saturated(w.partner, ctx.bank_hat, i, cfg.s);
      w.loss += wn * t.value;
      for (std::size_t k = 0; k < l; ++k) grad_hat[k] += wn * t.grad_vhat[k];
      for (double& c : t.coef) c *= wn;
      w.coef_bank = std::move(t.coef);
    }
    if (cfg.pseudo_active() && st.pseudo) {
      const double lp = cfg.lambda_pseudo;
      SaturatedNhdTerms t =
          nhd_softmax_saturated(w.partner, ctx.pseudo_hat, st.pseudo->assignment[i], cfg.s);
      w.loss += lp * t.value;
      for (std::size_t k = 0; k < l; ++k) grad_hat[k] += lp * t.grad_vhat[k];
      for (double& c : t.coef) c *= lp;
      w.coef_pseudo = std::move(t.coef);
    }
    grad_tanh_normalize_into(x, cfg.s1, grad_hat, w.grad_x);
  }

  if (cfg.attention_loss_active()) {
    const AttentionLossOutput att = loss_attention(w.input, st.params.w_att);
    w.loss += cfg.lambda_att * att.value;
    if (with_grads) {
      w.grads.emplace(st.params);
      for (std::size_t c = 0; c < att.grad_w_att.size(); ++c)
        w.grads->w_att[c] += cfg.lambda_att * att.grad_w_att[c];
    }
  }
  if (!with_grads) return w;

  if (!w.grads) w.grads.emplace(st.params);
  if (st.variant == Variant::sign) {
    w.grads->add(backward(w.rep.f, w.input, st.params, w.grad_x, st.use_attention));
  } else {
    w.cb_grads = deltas_backward(w.rep.f.z, *st.codebooks, w.grad_x);
    backward_from_z(w.rep.f, w.input, st.params, w.cb_grads->z, *w.grads, st.use_attention);
  }
  return w;
}

/// grad of the memory (rows x l) from per-sample coefficients.
inline Matrix reduce_memory_grad(const Matrix& memory, const Matrix& memory_hat,
                                 const std::vector<SampleWork>& work, bool pseudo,
                                 const TrainConfig& cfg, double scale) {
  const std::size_t rows = memory.rows(), l = memory.cols();
  Matrix grad(rows, l);
  const bool dot_mode = cfg.loss_mode == LossMode::l2_baseline;
  const double inv_l = 1.0 / static_cast<double>(l);
  parallel_for(rows, [&](std::size_t j) {
    RealVector up(l, 0.0);
    auto wh = memory_hat.row(j);
    for (const SampleWork& w : work) {
      const RealVector& coef = pseudo ? w.coef_pseudo : w.coef_bank;
      if (coef.empty()) continue;
      const double c = coef[j];
      if (c == 0.0) continue;
      if (dot_mode) {
        for (std::size_t k = 0; k < l; ++k) up[k] += c * w.partner[k];
      } else {
        for (std::size_t k = 0; k < l; ++k) up[k] -= c * inv_l * sign0(w.partner[k] - wh[k]);
      }
    }
    auto g = grad.row(j);
    if (dot_mode) {
      for (std::size_t k = 0; k < l; ++k) g[k] = scale * cfg.s * up[k] * (1.0 - wh[k] * wh[k]);
    } else {
      for (double& u : up) u *= scale;
      try {
        grad_tanh_normalize_into(memory.row(j), cfg.s1, up, g);
      } catch (const NumericError&) {
        throw NumericError("degenerate memory row norm", j);
      }
    }
  });
  return grad;
}

inline void train_step(const Dataset& data, const TrainConfig& cfg, ModelState& st,
                       std::span<const std::size_t> batch, std::size_t epoch, double& loss_sum) {
  const StepContext ctx = make_context(data, cfg, st);
  std::vector<SampleWork> work(batch.size());
  parallel_for(batch.size(), [&](std::size_t b) {
    work[b] = compute_sample(ctx, batch[b], epoch, true);
  });
  const double scale = 1.0 / static_cast<double>(batch.size());

  EncoderGrads g(st.params);
  Matrix g_mu0, g_mu1;
  if (st.variant == Variant::codebook) {
    g_mu0 = Matrix(st.codebooks->bits(), st.codebooks->dim());
    g_mu1 = g_mu0;
  }
  for (const SampleWork& w : work) {
    loss_sum += w.loss;
    g.add(*w.grads, scale);
    if (w.cb_grads) {
      auto d0 = g_mu0.flat();
      auto d1 = g_mu1.flat();
      auto s0 = w.cb_grads->mu0.flat();
      auto s1 = w.cb_grads->mu1.flat();
      for (std::size_t k = 0; k < d0.size(); ++k) {
        d0[k] += scale * s0[k];
        d1[k] += scale * s1[k];
      }
    }
  }

  if (cfg.code_loss_active()) {
    Matrix z(batch.size(), st.codebooks->dim());
    for (std::size_t b = 0; b < batch.size(); ++b)
      std::copy(work[b].rep.f.z.begin(), work[b].rep.f.z.end(), z.row(b).begin());
    const DecLossOutput dec = dec_loss(z, *st.codebooks);
    const double w = cfg.lambda_code * scale;
    loss_sum += cfg.lambda_code * dec.value;
    auto d0 = g_mu0.flat();
    auto d1 = g_mu1.flat();
    auto s0 = dec.grad_mu0.flat();
    auto s1 = dec.grad_mu1.flat();
    for (std::size_t k = 0; k < d0.size(); ++k) {
      d0[k] += w * s0[k];
      d1[k] += w * s1[k];
    }
    for (std::size_t b = 0; b < batch.size(); ++b) {
      RealVector gz(dec.grad_z.row(b).begin(), dec.grad_z.row(b).end());
      for (double& x : gz) x *= w;
      backward_from_z(work[b].rep.f, work[b].input, st.params, gz, g, st.use_attention);
    }
  }

  Matrix g_bank, g_pseudo;
  const bool bank_used = cfg.loss_mode == LossMode::l2_baseline || cfg.nhd_weight() > 0.0;
  if (bank_used) g_bank = reduce_memory_grad(st.bank.rows, ctx.bank_hat, work, false, cfg, scale);
  const bool pseudo_used = cfg.pseudo_active() && st.pseudo;
  if (pseudo_used)
    g_pseudo = reduce_memory_grad(st.pseudo->rows, ctx.pseudo_hat, work, true, cfg, scale);

  AdamConfig adam = cfg.adam;
  adam.lr = cfg.lr;
  if (st.variant == Variant::sign) {
    adam_step(st.opt_w_fc, st.params.w_fc.flat(), g.w_fc.flat(), adam);
    adam_step(st.opt_b, st.params.b, g.b, adam);
  } else {
    adam_step(st.opt_mu0, st.codebooks->mu0.flat(), g_mu0.flat(), adam);
    adam_step(st.opt_mu1, st.codebooks->mu1.flat(), g_mu1.flat(), adam);
  }
  if (st.use_attention) adam_step(st.opt_w_att, st.params.w_att, g.w_att, adam);
  if (bank_used) adam_step(st.opt_bank, st.bank.rows.flat(), g_bank.flat(), adam);
  if (pseudo_used) adam_step(st.opt_pseudo, st.pseudo->rows.flat(), g_pseudo.flat(), adam);
}

/// Surrogates x for every sample under the current state (N x l).
inline Matrix all_surrogates(const Dataset& data, const ModelState& st) {
  Matrix x(data.size(), st.bits());
  parallel_for(data.size(), [&](std::size_t i) {
    const Representation r = represent(data.samples[i], st);
    std::copy(r.x.begin(), r.x.end(), x.row(i).begin());
  });
  return x;
}

inline void refresh_pseudo_labels(const Dataset& data, const TrainConfig& cfg, ModelState& st,
                                  std::size_t epoch) {
  const Matrix x = all_surrogates(data, st);
  Matrix xhat(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    try {
      tanh_normalize_into(x.row(i), cfg.s1, xhat.row(i));
    } catch (const NumericError&) {
      throw NumericError("degenerate feature norm", i);
    }
  }
  Clustering c;
  try {
    c = affinity_propagation(build_similarity(xhat, cfg.ap.preference), cfg.ap);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
  }
  st.pseudo = refresh_cluster_memory(c, x, st.pseudo ? &*st.pseudo : nullptr);
  st.opt_pseudo = AdamState(st.pseudo->rows.size());
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline PackedCodeSet encode(const Dataset& data, const ModelState& st) {
  PackedCodeSet codes(st.bits(), data.size());
  std::vector<BitCode> rows(data.size(), BitCode(st.bits()));
  parallel_for(data.size(), [&](std::size_t i) {
    rows[i] = detail::code_of(detail::represent(data.samples[i], st), st);
  });
  for (std::size_t i = 0; i < rows.size(); ++i) codes.assign(i, rows[i]);
  return codes;
}

/// Sign-variant inference from encoder parameters alone.
inline PackedCodeSet encode(const Dataset& data, const EncoderParams& params,
                            bool use_attention = true) {
  ModelState st;
  st.params = params;
  st.use_attention = use_attention;
  return encode(data, st);
}

/// Training-set mAP over fine labels, each sample querying all others.
inline double training_map(const PackedCodeSet& codes, const Dataset& data) {
  if (!data.has_labels()) return NAN;
  const RetrievalResult r = rank_by_hamming(codes, codes, std::nullopt, true);
  return mean_ap(r, data.fine_labels, data.fine_labels);
}

inline EpochMetrics evaluate_state(const Dataset& data, const TrainConfig& cfg,
                                   const ModelState& st, std::size_t epoch, double mean_loss) {
  const std::size_t n = data.size();
  EpochMetrics m;
  m.epoch = epoch;
  m.loss = mean_loss;
  m.clusters = st.pseudo ? st.pseudo->clusters() : 0;

  PackedCodeSet codes(st.bits(), n);
  std::vector<double> norm(n), absv(n), dii(n);
  std::vector<BitCode> rows(n, BitCode(st.bits()));
  parallel_for(n, [&](std::size_t i) {
    const detail::Representation r = detail::represent(data.samples[i], st);
    rows[i] = detail::code_of(r, st);
    norm[i] = l2_norm(r.x);
    if (norm[i] > kNormEpsilon) {
      const SaturatedVector xh = tanh_normalize(r.x, cfg.s1);
      absv[i] = l1_norm(xh.values()) / static_cast<double>(xh.size());
      if (l2_norm(st.bank.rows.row(i)) > kNormEpsilon)
        dii[i] = nhd_real(xh, tanh_normalize(st.bank.rows.row(i), cfg.s1));
    }
  });
  for (std::size_t i = 0; i < n; ++i) codes.assign(i, rows[i]);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.mean_norm_v += norm[i] * inv;
    m.mean_abs_vhat += absv[i] * inv;
    m.mean_dii += dii[i] * inv;
  }
  m.p_collision = n >= 2 ? collision_probability(codes) : NAN;
  m.map = training_map(codes, data);
  return m;
}

/// Fresh model: seeded encoder (and codebooks), bank rows set to the initial
/// surrogates.
inline ModelState init_model(const Dataset& data, const TrainConfig& cfg) {
  require(data.size() >= 2, "training needs at least two samples");
  ModelState st;
  st.variant = cfg.variant;
  st.use_attention = cfg.use_attention;
  st.seed = cfg.seed;
  st.params = init_encoder(cfg.bits, data.channels, derive_seed(cfg.seed, seed_tag::kInit));
  if (cfg.variant == Variant::codebook) {
    Matrix z(data.size(), 2 * data.channels);
    parallel_for(data.size(), [&](std::size_t i) {
      const ForwardResult f = forward(data.samples[i], st.params, st.use_attention);
      std::copy(f.z.begin(), f.z.end(), z.row(i).begin());
    });
    st.codebooks = init_codebooks(z, cfg.bits, derive_seed(cfg.seed, seed_tag::kCodebook));
    st.opt_mu0 = AdamState(st.codebooks->mu0.size());
    st.opt_mu1 = AdamState(st.codebooks->mu1.size());
  }
  st.bank.rows = detail::all_surrogates(data, st);
  st.opt_w_fc = AdamState(st.params.w_fc.size());
  st.opt_b = AdamState(st.params.b.size());
  st.opt_w_att = AdamState(st.params.w_att.size());
  st.opt_bank = AdamState(st.bank.rows.size());
  return st;
}

using EpochCallback = std::function<void(const EpochMetrics&)>;

inline TrainResult train(const Dataset& data, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  require(data.size() >= 2, "training needs at least two samples");
  TrainResult res;
  ModelState& st = res.state;
  st = init_model(data, cfg);
  const std::size_t n = data.size();

  auto record = [&](const EpochMetrics& m) {
    res.log.push_back(m);
    if (on_epoch) on_epoch(m);
  };

  if (cfg.pseudo_active()) detail::refresh_pseudo_labels(data, cfg, st, 0);
  {
    const detail::StepContext ctx = detail::make_context(data, cfg, st);
    std::vector<double> losses(n);
    parallel_for(n, [&](std::size_t i) { losses[i] = detail::compute_sample(ctx, i, 0, false).loss; });
    double mean = 0.0;
    for (double v : losses) mean += v;
    if (cfg.code_loss_active()) {
      Matrix z(n, st.codebooks->dim());
      for (std::size_t i = 0; i < n; ++i) {
        const ForwardResult f = forward(data.samples[i], st.params, st.use_attention);
        std::copy(f.z.begin(), f.z.end(), z.row(i).begin());
      }
      mean += cfg.lambda_code * dec_loss(z, *st.codebooks).value;
    }
    record(evaluate_state(data, cfg, st, 0, mean / static_cast<double>(n)));
  }

  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, seed_tag::kShuffle));
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.pseudo_active() && epoch > 1 && (epoch - 1) % cfg.pseudo_refresh_epochs == 0)
      detail::refresh_pseudo_labels(data, cfg, st, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      detail::train_step(data, cfg, st, std::span(order).subspan(lo, hi - lo), epoch, loss_sum);
    }
    st.epoch = static_cast<std::uint32_t>(epoch);
    record(evaluate_state(data, cfg, st, epoch, loss_sum / static_cast<double>(n)));
  }
  return res;
}

// ---------------------------------------------------------------------------
// "CRHM" model file, all little-endian:
//   magic, u16 version, u32 l, C, N, n_c
//   f64 tensors: w_fc (l x 2C), b (l), w_att (C), W (N x l), W_pseudo (n_c x l)
//   Adam moments m then v for each of those five tensors, same order
//   u64 Adam step counters for the five tensors
//   u32 assignment[N] (present iff n_c > 0)
//   u8 variant tag (0 sign, 1 codebook); for codebook: u32 D, then f64 mu0
//     (l x D), mu1 (l x D), their Adam m and v, u64 step counters
//   u8 attention flag, u32 epoch, u64 seed

inline constexpr std::uint16_t kModelFileVersion = 1;

namespace detail {

inline void put_adam_moments(std::ostream& os, const AdamState& a) {
  io::put_f64s(os, a.m);
  io::put_f64s(os, a.v);
}
inline void get_adam_moments(std::istream& is, AdamState& a, std::size_t n) {
  a = AdamState(n);
  io::get_f64s(is, a.m);
  io::get_f64s(is, a.v);
}

}  // namespace detail

inline void write_model(std::ostream& os, const ModelState& st) {
  const std::size_t l = st.bits(), c = st.channels(), n = st.bank.rows.rows();
  const std::size_t nc = st.pseudo ? st.pseudo->clusters() : 0;
  os.write("CRHM", 4);
  io::put_le<std::uint16_t>(os, kModelFileVersion);
  for (std::size_t d : {l, c, n, nc}) io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  io::put_f64s(os, st.params.w_fc.flat());
  io::put_f64s(os, st.params.b);
  io::put_f64s(os, st.params.w_att);
  io::put_f64s(os, st.bank.rows.flat());
  if (nc) io::put_f64s(os, st.pseudo->rows.flat());
  const AdamState* opts[] = {&st.opt_w_fc, &st.opt_b, &st.opt_w_att, &st.opt_bank, &st.opt_pseudo};
  const std::size_t sizes[] = {l * 2 * c, l, c, n * l, nc * l};
  for (std::size_t k = 0; k < 5; ++k) {
    AdamState a = *opts[k];
    if (a.m.size() != sizes[k]) a = AdamState(sizes[k]);
    detail::put_adam_moments(os, a);
  }
  for (const AdamState* a : opts) io::put_le<std::uint64_t>(os, a->t);
  if (nc)
    for (std::uint32_t v : st.pseudo->assignment) io::put_le(os, v);
  io::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(st.variant));
  if (st.variant == Variant::codebook) {
    const CodebookSet& cb = *st.codebooks;
    io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(cb.dim()));
    io::put_f64s(os, cb.mu0.flat());
    io::put_f64s(os, cb.mu1.flat());
    detail::put_adam_moments(os, st.opt_mu0);
    detail::put_adam_moments(os, st.opt_mu1);
    io::put_le<std::uint64_t>(os, st.opt_mu0.t);
    io::put_le<std::uint64_t>(os, st.opt_mu1.t);
  }
  io::put_le<std::uint8_t>(os, st.use_attention ? 1 : 0);
  io::put_le<std::uint32_t>(os, st.epoch);
  io::put_le<std::uint64_t>(os, st.seed);
}

inline ModelState read_model(std::istream& is) {
  io::expect_magic(is, "CRHM", "CRHM model");
  if (io::get_le<std::uint16_t>(is) != kModelFileVersion) throw FormatError("unsupported CRHM version");
  const std::size_t l = io::get_le<std::uint32_t>(is), c = io::get_le<std::uint32_t>(is),
                    n = io::get_le<std::uint32_t>(is), nc = io::get_le<std::uint32_t>(is);
  if (l < 1 || l > kMaxBits || c < 1 || c > (1u << 16) || nc > n ||
      static_cast<std::uint64_t>(n) * l > (1ULL << 28))
    throw FormatError("CRHM dimensions out of range");
  ModelState st;
  st.params = {Matrix(l, 2 * c), RealVector(l), RealVector(c)};
  st.bank.rows = Matrix(n, l);
  io::get_f64s(is, st.params.w_fc.flat());
  io::get_f64s(is, st.params.b);
  io::get_f64s(is, st.params.w_att);
  io::get_f64s(is, st.bank.rows.flat());
  if (nc) {
    st.pseudo.emplace();
    st.pseudo->rows = Matrix(nc, l);
    io::get_f64s(is, st.pseudo->rows.flat());
  }
  AdamState* opts[] = {&st.opt_w_fc, &st.opt_b, &st.opt_w_att, &st.opt_bank, &st.opt_pseudo};
  const std::size_t sizes[] = {l * 2 * c, l, c, n * l, nc * l};
  for (std::size_t k = 0; k < 5; ++k) detail::get_adam_moments(is, *opts[k], sizes[k]);
  for (AdamState* a : opts) a->t = io::get_le<std::uint64_t>(is);
  if (nc) {
    st.pseudo->assignment.resize(n);
    for (auto& v : st.pseudo->assignment) {
      v = io::get_le<std::uint32_t>(is);
      if (v >= nc) throw FormatError("CRHM assignment index out of range");
    }
  }
  const auto tag = io::get_le<std::uint8_t>(is);
  if (tag > 1) throw FormatError("CRHM variant tag must be 0 or 1");
  st.variant = static_cast<Variant>(tag);
  if (st.variant == Variant::codebook) {
    const std::size_t d = io::get_le<std::uint32_t>(is);
    if (d != 2 * c) throw FormatError("CRHM codebook dimension does not match 2C");
    st.codebooks = CodebookSet{Matrix(l, d), Matrix(l, d)};
    io::get_f64s(is, st.codebooks->mu0.flat());
    io::get_f64s(is, st.codebooks->mu1.flat());
    detail::get_adam_moments(is, st.opt_mu0, l * d);
    detail::get_adam_moments(is, st.opt_mu1, l * d);
    st.opt_mu0.t = io::get_le<std::uint64_t>(is);
    st.opt_mu1.t = io::get_le<std::uint64_t>(is);
  }
  const auto att = io::get_le<std::uint8_t>(is);
  if (att > 1) throw FormatError("CRHM attention flag must be 0 or 1");
  st.use_attention = att == 1;
  st.epoch = io::get_le<std::uint32_t>(is);
  st.seed = io::get_le<std::uint64_t>(is);
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in CRHM file");
  return st;
}

}  // namespace crh

#endif  // CRH_TRAINER_HPP
