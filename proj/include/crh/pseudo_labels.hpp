#ifndef CRH_PSEUDO_LABELS_HPP
#define CRH_PSEUDO_LABELS_HPP

// Affinity-propagation pseudo labels. Responsibilities and availabilities are
// updated Jacobi-style from the previous iteration's matrices with damping;
// exemplars are the points with r(k,k) + a(k,k) > 0.

#include <optional>
#include <vector>

#include "crh/common.hpp"
#include "crh/losses.hpp"

namespace crh {

struct APConfig {
  double damping = 0.9;
  std::size_t max_iter = 200;
  std::size_t convergence_window = 15;
  std::optional<double> preference;  // nullopt: median of off-diagonal similarities

  void validate() const {
    if (!(damping >= 0.5 && damping < 1.0)) throw DomainError("AP damping must be in [0.5, 1)");
    if (max_iter < 1) throw DomainError("AP max_iter must be >= 1");
    if (convergence_window < 1) throw DomainError("AP convergence window must be >= 1");
  }
};

struct Clustering {
  std::vector<std::size_t> exemplars;     // sample index of each cluster's exemplar
  std::vector<std::uint32_t> assignment;  // sample -> exemplar slot
  std::size_t iterations = 0;
  bool converged = false;

  std::size_t clusters() const noexcept { return exemplars.size(); }
};

inline double median_off_diagonal(const Matrix& s) {
  const std::size_t n = s.rows();
  std::vector<double> vals;
  vals.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (i != k) vals.push_back(s(i, k));
  const std::size_t mid = vals.size() / 2;
  std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
  const double hi = vals[mid];
  if (vals.size() % 2 == 1) return hi;
  const double lo = *std::max_element(vals.begin(), vals.begin() + mid);
  return 0.5 * (lo + hi);
}

/// S[i][j] = -|x_i - x_j|_2^2 over rows of `features`, diagonal set to the
/// preference (median of the off-diagonal entries unless given).
inline Matrix build_similarity(const Matrix& features,
                               std::optional<double> preference = std::nullopt) {
  const std::size_t n = features.rows();
  if (n < 2) throw DomainError("build_similarity needs at least two points");
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto xi = features.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      auto xj = features.row(j);
      double d2 = 0.0;
      for (std::size_t k = 0; k < xi.size(); ++k) d2 += (xi[k] - xj[k]) * (xi[k] - xj[k]);
      s(i, j) = s(j, i) = -d2;
    }
  }
  const double pref = preference ? *preference : median_off_diagonal(s);
  for (std::size_t i = 0; i < n; ++i) s(i, i) = pref;
  return s;
}

namespace detail {

inline Clustering assign_to_exemplars(const Matrix& s, std::vector<std::size_t> exemplars) {
  const std::size_t n = s.rows();
  Clustering c;
  c.assignment.assign(n, 0);
  std::vector<int> slot_of(n, -1);
  for (std::size_t e = 0; e < exemplars.size(); ++e) slot_of[exemplars[e]] = static_cast<int>(e);
  for (std::size_t i = 0; i < n; ++i) {
    if (slot_of[i] >= 0) {
      c.assignment[i] = static_cast<std::uint32_t>(slot_of[i]);
      continue;
    }
    std::size_t best = 0;
    for (std::size_t e = 1; e < exemplars.size(); ++e)
      if (s(i, exemplars[e]) > s(i, exemplars[best])) best = e;
    c.assignment[i] = static_cast<std::uint32_t>(best);
  }
  c.exemplars = std::move(exemplars);
  return c;
}

}  // namespace detail

inline Clustering affinity_propagation(Matrix s, const APConfig& cfg) {
  cfg.validate();
  const std::size_t n = s.rows();
  if (n < 2 || s.cols() != n) throw DomainError("AP needs a square similarity matrix, N >= 2");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite(s(i, k))) throw DomainError("AP similarity matrix has non-finite entries");
      if (i < k && s(i, k) != s(k, i)) throw DomainError("AP similarity matrix is not symmetric");
    }
  // The diagonal of S carries the preferences; cfg.preference overrides it.
  if (cfg.preference)
    for (std::size_t i = 0; i < n; ++i) s(i, i) = *cfg.preference;

  // All similarities equal and all preferences equal: message passing is stuck
  // at its fixed point, so resolve the tie directly.
  {
    const double off = s(0, 1), pref = s(0, 0);
    bool flat = true;
    for (std::size_t i = 0; i < n && flat; ++i)
      for (std::size_t k = 0; k < n && flat; ++k) flat = s(i, k) == (i == k ? pref : off);
    if (flat) {
      std::vector<std::size_t> ex;
      if (pref > off)
        for (std::size_t i = 0; i < n; ++i) ex.push_back(i);
      else
        ex.push_back(0);
      Clustering c = detail::assign_to_exemplars(s, std::move(ex));
      c.converged = true;
      return c;
    }
  }

  const double lam = cfg.damping;
  Matrix r(n, n), a(n, n);
  RealVector colsum(n);
  std::vector<char> exemplar(n, 0), previous(n, 0);
  std::size_t stable = 0;
  Clustering result;

  for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
    // responsibilities
    for (std::size_t i = 0; i < n; ++i) {
      auto si = s.row(i);
      auto ai = a.row(i);
      auto ri = r.row(i);
      double first = -INFINITY, second = -INFINITY;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const double v = ai[k] + si[k];
        if (v > first) {
          second = first;
          first = v;
          arg = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        const double fresh = si[k] - (k == arg ? second : first);
        ri[k] = lam * ri[k] + (1.0 - lam) * fresh;
      }
    }
    // availabilities
    std::fill(colsum.begin(), colsum.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto ri = r.row(i);
      for (std::size_t k = 0; k < n; ++k) colsum[k] += (i == k) ? ri[k] : std::max(0.0, ri[k]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto ri = r.row(i);
      auto ai = a.row(i);
      for (std::size_t k = 0; k < n; ++k) {
        const double fresh = (i == k) ? colsum[k] - ri[k]
                                      : std::min(0.0, colsum[k] - std::max(0.0, ri[k]));
        ai[k] = lam * ai[k] + (1.0 - lam) * fresh;
      }
    }

    std::size_t count = 0;
    for (std::size_t k = 0; k < n; ++k) count += (exemplar[k] = (r(k, k) + a(k, k) > 0.0));
    stable = (exemplar == previous) ? stable + 1 : 0;
    previous = exemplar;
    result.iterations = it;
    if (count > 0 && stable >= cfg.convergence_window) {
      result.converged = true;
      break;
    }
  }

  std::vector<std::size_t> ex;
  for (std::size_t k = 0; k < n; ++k)
    if (exemplar[k]) ex.push_back(k);
  if (ex.empty()) throw NumericError("no exemplars");
  Clustering c = detail::assign_to_exemplars(s, std::move(ex));
  c.iterations = result.iterations;
  c.converged = result.converged;
  return c;
}

/// Cluster memory whose row c is the mean raw feature over the members of
/// cluster c. Any previous memory is discarded.
inline ClusterMemory refresh_cluster_memory(const Clustering& clustering, const Matrix& features,
                                            const ClusterMemory* /*existing*/ = nullptr) {
  const std::size_t n = features.rows(), nc = clustering.clusters();
  require(clustering.assignment.size() == n, "clustering does not cover the feature set");
  require(nc >= 1, "clustering has no clusters");
  ClusterMemory m{Matrix(nc, features.cols()), clustering.assignment};
  std::vector<std::size_t> count(nc, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t c = clustering.assignment[i];
    require(c < nc, "assignment index out of range");
    ++count[c];
    auto dst = m.rows.row(c);
    auto src = features.row(i);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
  for (std::size_t c = 0; c < nc; ++c)
    for (double& x : m.rows.row(c)) x /= static_cast<double>(count[c]);
  return m;
}

}  // namespace crh

#endif  // CRH_PSEUDO_LABELS_HPP
