#ifndef CRH_EVALUATION_HPP
#define CRH_EVALUATION_HPP

// Hamming ranking, mAP, collision census and NHD distribution diagnostics,
// plus the key<TAB>value report writer shared by every command.

#include <charconv>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "crh/common.hpp"
#include "crh/hamming.hpp"

namespace crh {

struct Neighbor {
  std::uint32_t index;
  std::uint32_t distance;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Per query, database entries by ascending Hamming distance, ties by index.
struct RetrievalResult {
  std::vector<std::vector<Neighbor>> rankings;
};

/// Exact linear scan. Ranking is a counting sort over distance buckets, which
/// keeps database order inside each bucket. With exclude_self, queries and
/// database are the same set and each query's own entry is skipped.
inline RetrievalResult rank_by_hamming(const PackedCodeSet& queries, const PackedCodeSet& database,
                                       std::optional<std::size_t> top_k = std::nullopt,
                                       bool exclude_self = false) {
  if (queries.bits() != database.bits()) throw DomainError("rank_by_hamming: code length mismatch");
  if (exclude_self && queries.size() != database.size())
    throw DomainError("rank_by_hamming: exclude_self needs queries == database");
  const std::size_t nq = queries.size(), nd = database.size(), l = queries.bits();
  RetrievalResult out;
  out.rankings.resize(nq);

  parallel_for(nq, [&](std::size_t q) {
    std::vector<std::uint32_t> dist(nd);
    std::vector<std::size_t> bucket(l + 2, 0);
    auto qrow = queries.row(q);
    for (std::size_t j = 0; j < nd; ++j) {
      if (exclude_self && j == q) continue;
      dist[j] = static_cast<std::uint32_t>(hamming_words(qrow, database.row(j)));
      ++bucket[dist[j] + 1];
    }
    for (std::size_t d = 1; d < bucket.size(); ++d) bucket[d] += bucket[d - 1];
    const std::size_t total = bucket.back();
    std::vector<Neighbor> ranked(total);
    for (std::size_t j = 0; j < nd; ++j) {
      if (exclude_self && j == q) continue;
      ranked[bucket[dist[j]]++] = {static_cast<std::uint32_t>(j), dist[j]};
    }
    if (top_k && *top_k < ranked.size()) ranked.resize(*top_k);
    out.rankings[q] = std::move(ranked);
  });
  return out;
}

/// AP_q = (1 / R) sum_{k <= K} Prec@k rel(k), R = relevant items within the
/// horizon; queries with R = 0 are left out of the mean.
inline double mean_ap(const RetrievalResult& result, std::span<const std::uint32_t> query_labels,
                      std::span<const std::uint32_t> db_labels,
                      std::optional<std::size_t> top_k = std::nullopt) {
  require(query_labels.size() == result.rankings.size(), "mean_ap: query label count mismatch");
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t q = 0; q < result.rankings.size(); ++q) {
    const auto& ranked = result.rankings[q];
    const std::size_t horizon = top_k ? std::min(*top_k, ranked.size()) : ranked.size();
    std::size_t hits = 0;
    double ap = 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
      const std::uint32_t idx = ranked[k].index;
      require(idx < db_labels.size(), "mean_ap: database label count mismatch");
      if (db_labels[idx] == query_labels[q]) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(k + 1);
      }
    }
    if (hits == 0) continue;
    sum += ap / static_cast<double>(hits);
    ++counted;
  }
  if (counted == 0) throw DomainError("mAP undefined: no query has a relevant item");
  return sum / static_cast<double>(counted);
}

struct CollisionReport {
  double p_collision = 0.0;
  std::size_t n_groups = 0;
  std::size_t largest_group = 0;
  double ideal = 0.0;  // 2^-l, the uniform random hash
};

inline CollisionReport collision_report(const PackedCodeSet& codes) {
  const CollisionCensus c = collision_census(codes);
  return {c.probability(), c.n_groups, c.largest_group,
          std::ldexp(1.0, -static_cast<int>(codes.bits()))};
}

struct NhdHistogram {
  std::vector<std::uint64_t> counts;  // fixed-width bins over [0, 2]
  std::uint64_t pairs = 0;
  bool enumerated = false;
  double mean = 0.0;
  double std = 0.0;

  double bin_width() const { return 2.0 / static_cast<double>(counts.size()); }
};

/// Pairwise code NHDs, enumerated when C(n,2) <= n_pairs, otherwise sampled
/// as uniform random unordered pairs.
inline NhdHistogram nhd_histogram(const PackedCodeSet& codes, std::size_t n_pairs,
                                  std::uint64_t seed, std::size_t bins = 20) {
  const std::size_t n = codes.size();
  require(n >= 2, "nhd_histogram needs at least two codes");
  require(bins >= 1, "nhd_histogram needs at least one bin");
  NhdHistogram h;
  h.counts.assign(bins, 0);
  const double l = static_cast<double>(codes.bits());
  double mean = 0.0, m2 = 0.0;
  auto add = [&](std::size_t i, std::size_t j) {
    const double x = 2.0 * static_cast<double>(hamming_words(codes.row(i), codes.row(j))) / l;
    const std::size_t b = std::min(bins - 1, static_cast<std::size_t>(x / 2.0 * bins));
    ++h.counts[b];
    ++h.pairs;
    const double delta = x - mean;
    mean += delta / static_cast<double>(h.pairs);
    m2 += delta * (x - mean);
  };
  const std::uint64_t all_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (all_pairs <= n_pairs) {
    h.enumerated = true;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) add(i, j);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t p = 0; p < n_pairs; ++p) {
      const std::size_t i = pick(rng);
      std::size_t j = pick(rng);
      while (j == i) j = pick(rng);
      add(i, j);
    }
  }
  h.mean = mean;
  h.std = h.pairs > 1 ? std::sqrt(m2 / static_cast<double>(h.pairs - 1)) : 0.0;
  return h;
}

// ---------------------------------------------------------------------------
// Reports: one key<TAB>value pair per line.

/// Shortest round-trip decimal, always with a decimal point or exponent.
inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

class Report {
 public:
  Report& add(std::string key, std::string value) {
    entries_.emplace_back(std::move(key), std::move(value));
    return *this;
  }
  Report& add(std::string key, const char* value) { return add(std::move(key), std::string(value)); }
  Report& add(std::string key, double value) { return add(std::move(key), format_real(value)); }
  template <typename I>
    requires std::is_integral_v<I>
  Report& add(std::string key, I value) {
    return add(std::move(key), std::to_string(value));
  }

  std::string str() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + '\t' + v + '\n';
    return out;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline void add_collision_report(Report& r, const CollisionReport& c) {
  r.add("p_collision", c.p_collision)
      .add("n_groups", c.n_groups)
      .add("largest_group", c.largest_group)
      .add("ideal_p_collision", c.ideal);
}

inline void add_histogram(Report& r, const NhdHistogram& h) {
  r.add("pairs", h.pairs).add("enumerated", h.enumerated ? 1 : 0).add("mean_nhd", h.mean)
      .add("std_nhd", h.std);
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double lo = static_cast<double>(b) * h.bin_width();
    r.add("bin[" + format_real(lo) + "," + format_real(lo + h.bin_width()) + ")", h.counts[b]);
  }
}

}  // namespace crh

#endif  // CRH_EVALUATION_HPP
