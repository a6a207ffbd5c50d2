#ifndef CRH_HAMMING_HPP
#define CRH_HAMMING_HPP

// Bit-packed binary codes, popcount Hamming kernels and the collision census.
//
// Bit k of a code lives in bit (k % 64) of word k / 64. A set bit encodes the
// sign +1, a clear bit encodes -1. Bits past the code length are always zero,
// so whole-word comparison and popcount need no masking.

#include <bit>
#include <cstdint>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "crh/common.hpp"

namespace crh {

inline constexpr std::size_t kMaxBits = 4096;

inline constexpr std::size_t words_for(std::size_t bits) { return (bits + 63) / 64; }

inline std::uint64_t tail_mask(std::size_t bits) {
  const std::size_t r = bits % 64;
  return r == 0 ? ~0ULL : (1ULL << r) - 1;
}

inline void check_length(std::size_t bits) {
  if (bits < 1 || bits > kMaxBits) throw DomainError("code length must be in [1, 4096]");
}

class BitCode {
 public:
  explicit BitCode(std::size_t length) : length_(length) {
    check_length(length);
    words_.assign(words_for(length), 0);
  }

  /// Adopts raw words; rejects stray bits past length.
  BitCode(std::size_t length, std::span<const std::uint64_t> words) : BitCode(length) {
    require(words.size() == words_.size(), "word count does not match code length");
    std::copy(words.begin(), words.end(), words_.begin());
    if (words_.back() & ~tail_mask(length_)) throw DomainError("bits set past code length");
  }

  std::size_t size() const noexcept { return length_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool bit(std::size_t k) const { return (words_[k / 64] >> (k % 64)) & 1ULL; }
  void set(std::size_t k, bool on) {
    const std::uint64_t m = 1ULL << (k % 64);
    if (on)
      words_[k / 64] |= m;
    else
      words_[k / 64] &= ~m;
  }

  friend bool operator==(const BitCode&, const BitCode&) = default;

 private:
  std::size_t length_;
  std::vector<std::uint64_t> words_;
};

/// n codes of a common length, stored as one contiguous word array.
class PackedCodeSet {
 public:
  explicit PackedCodeSet(std::size_t bits, std::size_t n = 0)
      : bits_(bits), stride_(words_for(bits)) {
    check_length(bits);
    words_.assign(n * stride_, 0);
  }

  std::size_t size() const noexcept { return words_.size() / stride_; }
  std::size_t bits() const noexcept { return bits_; }
  std::size_t stride() const noexcept { return stride_; }

  std::span<const std::uint64_t> row(std::size_t i) const {
    return {words_.data() + i * stride_, stride_};
  }
  BitCode code(std::size_t i) const { return BitCode(bits_, row(i)); }

  void push_back(const BitCode& c) {
    require(c.size() == bits_, "code length differs from set length");
    words_.insert(words_.end(), c.words().begin(), c.words().end());
  }
  void assign(std::size_t i, const BitCode& c) {
    require(c.size() == bits_, "code length differs from set length");
    std::copy(c.words().begin(), c.words().end(), words_.begin() + i * stride_);
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  friend bool operator==(const PackedCodeSet&, const PackedCodeSet&) = default;

 private:
  std::size_t bits_;
  std::size_t stride_;
  std::vector<std::uint64_t> words_;
};

/// Packs a +-1 sign vector: bit k is set iff signs[k] == +1.
template <typename T>
BitCode pack_code(std::span<const T> signs) {
  BitCode code(signs.size());
  for (std::size_t k = 0; k < signs.size(); ++k) {
    if (signs[k] == T(1))
      code.set(k, true);
    else if (signs[k] != T(-1))
      throw DomainError("sign entries must be exactly -1 or +1");
  }
  return code;
}

inline BitCode pack_code(std::initializer_list<int> signs) {
  return pack_code(std::span<const int>(signs.begin(), signs.size()));
}

inline std::size_t hamming_words(std::span<const std::uint64_t> a,
                                 std::span<const std::uint64_t> b) noexcept {
  std::size_t d = 0;
  for (std::size_t w = 0; w < a.size(); ++w) d += std::popcount(a[w] ^ b[w]);
  return d;
}

inline std::size_t hamming(const BitCode& a, const BitCode& b) {
  if (a.size() != b.size()) throw DomainError("hamming: code length mismatch");
  return hamming_words(a.words(), b.words());
}

/// Code-level normalized Hamming distance: 2 * hamming / l, in [0, 2].
inline double nhd_codes(const BitCode& a, const BitCode& b) {
  return 2.0 * static_cast<double>(hamming(a, b)) / static_cast<double>(a.size());
}

struct CollisionCensus {
  std::uint64_t colliding_pairs = 0;
  std::uint64_t total_pairs = 0;
  std::size_t n_groups = 0;
  std::size_t largest_group = 0;

  double probability() const {
    return static_cast<double>(colliding_pairs) / static_cast<double>(total_pairs);
  }
};

/// Groups identical rows with a hash map keyed by the row index of the first
/// occurrence. Expected O(n) for any code length.
inline CollisionCensus collision_census(const PackedCodeSet& set) {
  const std::size_t n = set.size();
  if (n < 2) throw DomainError("collision probability undefined for fewer than two codes");

  auto hash = [&set](std::size_t i) {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (std::uint64_t w : set.row(i)) h = splitmix64(h ^ w);
    return static_cast<std::size_t>(h);
  };
  auto eq = [&set](std::size_t i, std::size_t j) {
    auto a = set.row(i), b = set.row(j);
    return std::equal(a.begin(), a.end(), b.begin());
  };
  std::unordered_map<std::size_t, std::uint64_t, decltype(hash), decltype(eq)> groups(
      n, hash, eq);
  for (std::size_t i = 0; i < n; ++i) ++groups[i];

  CollisionCensus c;
  c.n_groups = groups.size();
  for (const auto& [rep, k] : groups) {
    c.colliding_pairs += k * (k - 1) / 2;
    c.largest_group = std::max<std::size_t>(c.largest_group, k);
  }
  c.total_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  return c;
}

/// Fraction of unordered pairs whose codes are identical.
inline double collision_probability(const PackedCodeSet& set) {
  return collision_census(set).probability();
}

struct RandomCodeStats {
  double mean_nhd = 0.0;
  double std_nhd = 0.0;
  double collision_rate = 0.0;
};

/// Monte-Carlo statistics of NHD between pairs of uniform random l-bit codes.
inline RandomCodeStats random_code_stats(std::size_t bits, std::size_t n_pairs,
                                         std::uint64_t seed) {
  check_length(bits);
  require(n_pairs >= 1, "n_pairs must be >= 1");
  std::mt19937_64 rng(seed);
  const std::size_t stride = words_for(bits);
  const std::uint64_t last = tail_mask(bits);
  std::vector<std::uint64_t> a(stride), b(stride);

  // Welford accumulation over nhd values.
  double mean = 0.0, m2 = 0.0;
  std::size_t collisions = 0;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    for (std::size_t w = 0; w < stride; ++w) {
      a[w] = rng();
      b[w] = rng();
    }
    a.back() &= last;
    b.back() &= last;
    const std::size_t h = hamming_words(a, b);
    collisions += (h == 0);
    const double x = 2.0 * static_cast<double>(h) / static_cast<double>(bits);
    const double delta = x - mean;
    mean += delta / static_cast<double>(p + 1);
    m2 += delta * (x - mean);
  }
  RandomCodeStats st;
  st.mean_nhd = mean;
  st.std_nhd = n_pairs > 1 ? std::sqrt(m2 / static_cast<double>(n_pairs - 1)) : 0.0;
  st.collision_rate = static_cast<double>(collisions) / static_cast<double>(n_pairs);
  return st;
}

// "CRHB" code-set file: magic, u16 version, u32 n, u32 l, then n rows of
// ceil(l/64) u64 words, all little-endian.
inline constexpr std::uint16_t kCodeFileVersion = 1;

inline void write_code_set(std::ostream& os, const PackedCodeSet& set) {
  os.write("CRHB", 4);
  io::put_le<std::uint16_t>(os, kCodeFileVersion);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(set.size()));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(set.bits()));
  for (std::uint64_t w : set.words()) io::put_le(os, w);
}

inline PackedCodeSet read_code_set(std::istream& is) {
  io::expect_magic(is, "CRHB", "CRHB code set");
  const auto version = io::get_le<std::uint16_t>(is);
  if (version != kCodeFileVersion) throw FormatError("unsupported CRHB version");
  const auto n = io::get_le<std::uint32_t>(is);
  const auto bits = io::get_le<std::uint32_t>(is);
  if (bits < 1 || bits > kMaxBits) throw FormatError("CRHB code length out of range");
  PackedCodeSet set(bits);
  std::vector<std::uint64_t> words(words_for(bits));
  for (std::uint32_t i = 0; i < n; ++i) {
    for (auto& w : words) w = io::get_le<std::uint64_t>(is);
    if (words.back() & ~tail_mask(bits)) throw FormatError("CRHB row has bits past code length");
    set.push_back(BitCode(bits, words));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in CRHB file");
  return set;
}

}  // namespace crh

#endif  // CRH_HAMMING_HPP
