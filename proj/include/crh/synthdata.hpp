#ifndef CRH_SYNTHDATA_HPP
#define CRH_SYNTHDATA_HPP

// Seeded hierarchical synthetic data: coarse classes, fine sub-clusters inside
// them, and one rare local patch per fine cluster carrying a fine-specific
// offset. Every sample is a P x C local feature map.

#include <istream>
#include <ostream>
#include <random>
#include <vector>

#include "crh/common.hpp"
#include "crh/csa.hpp"

namespace crh {

struct SynthSpec {
  std::size_t n_coarse = 8;
  std::size_t fines_per_coarse = 4;
  std::size_t samples_per_fine = 32;
  std::size_t channels = 16;
  std::size_t positions = 9;
  double coarse_spread = 10.0;
  double fine_spread = 2.0;
  double noise_sigma = 0.5;
  double rare_patch_strength = 4.0;
  std::uint64_t seed = 7;

  std::size_t size() const { return n_coarse * fines_per_coarse * samples_per_fine; }

  void validate() const {
    if (n_coarse < 1 || fines_per_coarse < 1 || samples_per_fine < 1 || channels < 1 ||
        positions < 1)
      throw DomainError("synthetic dataset counts must be >= 1");
    if (!(coarse_spread > 0.0 && fine_spread > 0.0 && noise_sigma > 0.0))
      throw DomainError("synthetic dataset spreads and noise must be > 0");
    if (!(fine_spread < coarse_spread)) throw DomainError("fine_spread must be < coarse_spread");
    if (rare_patch_strength < 0.0) throw DomainError("rare_patch_strength must be >= 0");
  }
};

struct Dataset {
  std::size_t positions = 0;
  std::size_t channels = 0;
  std::vector<LocalFeatureMap> samples;
  std::vector<std::uint32_t> fine_labels;    // empty when unlabeled
  std::vector<std::uint32_t> coarse_labels;  // empty when unlabeled

  std::size_t size() const noexcept { return samples.size(); }
  bool has_labels() const noexcept { return !fine_labels.empty(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

using SynthDataset = Dataset;

namespace detail {
// Values are kept float-representable so a file round trip is lossless.
inline double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }
}  // namespace detail

inline Dataset generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, seed_tag::kData));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t c = spec.channels, p = spec.positions;

  Dataset d;
  d.positions = p;
  d.channels = c;
  d.samples.reserve(spec.size());
  RealVector coarse(c), fine(c), rare_dir(c);
  std::uint32_t fine_id = 0;
  for (std::size_t ci = 0; ci < spec.n_coarse; ++ci) {
    for (double& x : coarse) x = spec.coarse_spread * gauss(rng);
    for (std::size_t fi = 0; fi < spec.fines_per_coarse; ++fi, ++fine_id) {
      for (std::size_t k = 0; k < c; ++k) fine[k] = coarse[k] + spec.fine_spread * gauss(rng);
      for (double& x : rare_dir) x = gauss(rng);
      const double n = l2_norm(rare_dir);
      for (double& x : rare_dir) x /= n;
      const std::size_t rare_pos = std::uniform_int_distribution<std::size_t>(0, p - 1)(rng);
      for (std::size_t si = 0; si < spec.samples_per_fine; ++si) {
        LocalFeatureMap t(p, c);
        for (std::size_t pi = 0; pi < p; ++pi) {
          auto row = t.row(pi);
          for (std::size_t k = 0; k < c; ++k) {
            double x = fine[k] + spec.noise_sigma * gauss(rng);
            if (pi == rare_pos) x += spec.rare_patch_strength * rare_dir[k];
            row[k] = detail::to_f32(x);
          }
        }
        d.samples.push_back(std::move(t));
        d.fine_labels.push_back(fine_id);
        d.coarse_labels.push_back(static_cast<std::uint32_t>(ci));
      }
    }
  }
  return d;
}

/// Adds N(0, sigma_aug^2) noise to every local feature entry.
inline LocalFeatureMap augment(const LocalFeatureMap& sample, double sigma_aug, std::uint64_t seed) {
  require(sigma_aug >= 0.0, "sigma_aug must be >= 0");
  LocalFeatureMap out = sample;
  if (sigma_aug == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma_aug);
  for (double& x : out.flat()) x = detail::to_f32(x + gauss(rng));
  return out;
}

// "CRHF" dataset file: magic, u16 version, u32 N, P, C, label flag, then
// N*P*C f32 features (sample, position, channel), then N fine and N coarse
// u32 labels when flagged.
inline constexpr std::uint16_t kDataFileVersion = 1;

inline void write_dataset(std::ostream& os, const Dataset& d) {
  os.write("CRHF", 4);
  io::put_le<std::uint16_t>(os, kDataFileVersion);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.size()));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.positions));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.channels));
  io::put_le<std::uint32_t>(os, d.has_labels() ? 1u : 0u);
  for (const auto& s : d.samples)
    for (double x : s.flat()) io::put_f32(os, static_cast<float>(x));
  if (d.has_labels()) {
    for (auto v : d.fine_labels) io::put_le(os, v);
    for (auto v : d.coarse_labels) io::put_le(os, v);
  }
}

inline Dataset read_dataset(std::istream& is) {
  io::expect_magic(is, "CRHF", "CRHF dataset");
  if (io::get_le<std::uint16_t>(is) != kDataFileVersion) throw FormatError("unsupported CRHF version");
  const auto n = io::get_le<std::uint32_t>(is);
  Dataset d;
  d.positions = io::get_le<std::uint32_t>(is);
  d.channels = io::get_le<std::uint32_t>(is);
  const auto flag = io::get_le<std::uint32_t>(is);
  if (flag > 1) throw FormatError("CRHF label flag must be 0 or 1");
  if (n > 0 && (d.positions == 0 || d.channels == 0))
    throw FormatError("CRHF positions and channels must be positive");
  if (static_cast<std::uint64_t>(d.positions) * d.channels > (1ULL << 24))
    throw FormatError("CRHF sample shape is implausibly large");
  for (std::uint32_t i = 0; i < n; ++i) {
    LocalFeatureMap t(d.positions, d.channels);
    for (double& x : t.flat()) {
      x = io::get_f32(is);
      if (!std::isfinite(x)) throw FormatError("CRHF feature is not finite");
    }
    d.samples.push_back(std::move(t));
  }
  if (flag) {
    d.fine_labels.resize(n);
    d.coarse_labels.resize(n);
    for (auto& v : d.fine_labels) v = io::get_le<std::uint32_t>(is);
    for (auto& v : d.coarse_labels) v = io::get_le<std::uint32_t>(is);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in CRHF file");
  return d;
}

}  // namespace crh

#endif  // CRH_SYNTHDATA_HPP
