#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "varnn/matrix.hpp"

namespace varnn {

/// Deterministic counter-based generator (splitmix64). The same seed and the
/// same call sequence give the same stream on every platform, which is what
/// makes seeded training runs reproducible bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform index in [0, n).
  std::size_t next_index(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

 private:
  std::uint64_t state_;
};

/// Inverted-scale dropout mask: each entry is 0 or 1/(1-p), fixed after
/// sampling. Multiplying by a p=0 mask is an exact identity.
struct MaskVector {
  Vector values;
  double drop_prob = 0.0;

  std::size_t size() const { return values.size(); }
};

/// Samples entries independently: 0 with probability p, else 1/(1-p).
/// Consumes exactly `len` draws from the generator.
inline MaskVector sample_mask(std::size_t len, double drop_prob, Rng& rng) {
  if (!(drop_prob >= 0.0 && drop_prob < 1.0))
    throw std::invalid_argument("sample_mask: drop_prob must be in [0,1), got " +
                                std::to_string(drop_prob));
  MaskVector m;
  m.drop_prob = drop_prob;
  m.values.resize(len);
  const double keep_scale = 1.0 / (1.0 - drop_prob);
  for (std::size_t i = 0; i < len; ++i)
    m.values[i] = (rng.next_double() < drop_prob) ? 0.0 : keep_scale;
  return m;
}

inline Vector apply_mask(const Vector& x, const MaskVector& m) {
  check_len(x, m.values, "apply_mask");
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * m.values[i];
  return out;
}

/// Seeded Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& xs, Rng& rng) {
  for (std::size_t i = xs.size(); i > 1; --i) {
    std::size_t j = rng.next_index(i);
    std::swap(xs[i - 1], xs[j]);
  }
}

}  // namespace varnn
