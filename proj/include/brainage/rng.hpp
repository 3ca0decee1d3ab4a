#pragma once

#include <array>
#include <cstdint>

namespace brainage {

/// Counter-based generator: Philox4x32-10 (Salmon et al., SC'11) keyed by
/// (seed, stream). Draw n of a given (seed, stream) is a pure function of n,
/// so sequences are identical on every platform and thread count.
///
/// Layout (version 1): key = 64-bit seed split into two 32-bit words (low
/// first); counter = {n_lo, n_hi, stream_lo, stream_hi}. Changing this layout
/// changes every golden sequence in tests/test_rng.cpp.
class Rng {
 public:
  static constexpr int kVersion = 1;
  using Block = std::array<std::uint32_t, 4>;

  Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  static Block philox(Block counter, std::array<std::uint32_t, 2> key);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t position() const noexcept { return counter_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; consumes two 64-bit draws per pair.
  double normal();
  /// Uniform integer in [0, n), rejection-sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n);

  /// Independent child generator for sub-task `id`.
  Rng split(std::uint64_t id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  Block buffer_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Fisher-Yates shuffle driven by `rng`.
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace brainage
