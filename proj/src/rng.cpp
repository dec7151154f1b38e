#include "herd/rng.hpp"

#include "herd/errors.hpp"

namespace herd {

std::uint64_t derive_key(std::uint64_t root, std::uint64_t a, std::uint64_t b) {
  std::uint64_t k = mix64(root + kGolden);
  k = mix64(k ^ (a * 0xff51afd7ed558ccdULL + kGolden));
  k = mix64(k ^ (b * 0xc4ceb9fe1a85ec53ULL + kGolden));
  return k;
}

std::int64_t inverse_cdf_index(const double* probs, std::int64_t n, CounterRng& rng) {
  if (n < 1) throw EmptyVector("inverse-CDF draw over an empty row");
  const double u = rng.next_unit();
  double cum = 0.0;
  std::int64_t last_positive = -1;
  for (std::int64_t k = 0; k < n; ++k) {
    if (probs[k] > 0.0) last_positive = k;
    cum += probs[k];
    if (u < cum) return k;
  }
  if (last_positive < 0) throw AllZeroProbability("inverse-CDF draw over an all-zero row");
  return last_positive;
}

}  // namespace herd
