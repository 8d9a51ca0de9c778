#pragma once

// Shared plumbing: error taxonomy and the deterministic RNG used by every
// seeded component. All randomness flows through Rng so that a given seed
// yields the same byte stream on every platform (the mt19937_64 engine is
// fully specified by the standard; the distributions here are hand-rolled
// because the standard library's are not).

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace xsl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument values.
struct ConfigError : Error {
  using Error::Error;
};

/// Malformed input data (episode files, gold lexicons, id ranges).
struct DataError : Error {
  using Error::Error;
};

/// Filesystem and serialization failures.
struct IoError : Error {
  using Error::Error;
};

struct SnapshotVersionError : IoError {
  using IoError::IoError;
};

struct SnapshotCorruptError : IoError {
  using IoError::IoError;
};

/// Non-finite values encountered during training.
struct NumericalError : Error {
  using Error::Error;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a stream index.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x51ed270b0f4d2d1cULL));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  /// Unbiased integer in [0, n) via rejection sampling.
  uint64_t below(uint64_t n) {
    if (n == 0) throw ConfigError("Rng::below requires n > 0");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; consumes two uniforms per pair.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    has_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t k = v.size(); k > 1; --k) {
      std::swap(v[k - 1], v[below(k)]);
    }
  }

  /// k distinct values from [0, n), in draw order.
  std::vector<uint32_t> sample_distinct(uint32_t n, uint32_t k) {
    if (k > n) throw ConfigError("sample_distinct: k exceeds n");
    std::vector<uint32_t> pool(n);
    for (uint32_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<uint32_t> out(k);
    for (uint32_t i = 0; i < k; ++i) {
      const uint64_t j = i + below(n - i);
      std::swap(pool[i], pool[j]);
      out[i] = pool[i];
    }
    return out;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace xsl
