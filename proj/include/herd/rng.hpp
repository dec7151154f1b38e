#pragma once

#include <cstdint>

namespace herd {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer: a bijective avalanche on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

// Expands one root seed into independent stream keys. Streams for distinct
// (root, a, b) triples are distinct with overwhelming probability, which is
// what makes parallel chains reproducible regardless of scheduling.
std::uint64_t derive_key(std::uint64_t root, std::uint64_t a, std::uint64_t b);

// Deterministic counter-based stream (SplitMix64 in counter mode): the n-th
// output depends only on (key, n). Uses integer arithmetic exclusively, so
// sequences are bit-identical across platforms, and the number of draws a
// consumer makes is observable through draw_count().
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + (++count_) * kGolden); }

  // Uniform on [0, 1), 53-bit mantissa.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1); never returns 0 or 1, safe under log(-log(u)).
  double next_open_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform over [0, n) by 128-bit multiply-shift. Consumes exactly one
  // draw; the selection bias of at most n / 2^64 is negligible at any
  // vocabulary size this library handles.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  std::uint64_t draw_count() const { return count_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t count_ = 0;
};

// Inverse-CDF draw from an unnormalized-tolerant nonnegative weight row.
// Consumes exactly one draw. Returns the last strictly positive cell if
// rounding pushes the scan past the end.
std::int64_t inverse_cdf_index(const double* probs, std::int64_t n, CounterRng& rng);

}  // namespace herd
