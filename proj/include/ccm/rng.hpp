#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace ccm {

// 64-bit FNV-1a. Used for seed derivation and content checksums.
inline constexpr uint64_t kFnvBasis = 14695981039346656037ULL;
uint64_t fnv1a(std::string_view s, uint64_t h = kFnvBasis);
uint64_t fnv1a_bytes(const void* data, std::size_t n, uint64_t h = kFnvBasis);
uint64_t fnv1a_u64(uint64_t v, uint64_t h);

// Derives an independent stream seed from a master seed, a purpose tag and up
// to two indices. Streams for different tags/indices never overlap in practice.
uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t a = 0,
                     uint64_t b = 0);

// Deterministic RNG. std::mt19937_64 is bit-exact by the standard; the
// distributions here are hand-rolled because the standard library ones are
// implementation-defined and would break byte-identical outputs.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, n) via rejection sampling. n must be > 0.
  uint32_t uniform_u32(uint32_t n);

  // Uniform in [0, 1) with 53-bit resolution (exact dyadic rationals).
  double uniform_real();

  double uniform_range(double lo, double hi);

  // Standard normal via the Marsaglia polar method (caches the spare value).
  double normal();

  // Normal draw quantized to 1e-6 steps; immune to last-ulp libm differences,
  // used where written files must be byte-identical across platforms.
  double normal_quantized();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ccm
