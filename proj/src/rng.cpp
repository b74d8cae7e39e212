#include "ccm/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace ccm {

uint64_t fnv1a(std::string_view s, uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t fnv1a_bytes(const void* data, std::size_t n, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t fnv1a_u64(uint64_t v, uint64_t h) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t a,
                     uint64_t b) {
  uint64_t h = fnv1a(tag);
  h = fnv1a_u64(master, h);
  h = fnv1a_u64(a, h);
  h = fnv1a_u64(b, h);
  // A zero seed would degenerate some engines; fold it away.
  return h == 0 ? 0x9e3779b97f4a7c15ULL : h;
}

uint32_t Rng::uniform_u32(uint32_t n) {
  if (n == 0) throw std::invalid_argument("uniform_u32: bound must be positive");
  const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n + 1) % n;
  uint64_t x = next_u64();
  while (x > limit) x = next_u64();
  return static_cast<uint32_t>(x % n);
}

double Rng::uniform_real() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_range(double lo, double hi) {
  return lo + (hi - lo) * uniform_real();
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform_real() - 1.0;
    v = 2.0 * uniform_real() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

double Rng::normal_quantized() {
  return std::nearbyint(normal() * 1e6) / 1e6;
}

}  // namespace ccm
