#ifndef MSUNET_RNG_H_
#define MSUNET_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace msunet {

// SplitMix64 finalizer; used to spread structured seeds (master ^ counter).
uint64_t Mix64(uint64_t x);

// Derives an independent stream seed from a parent seed, a stream label and
// an index. Pure function of its arguments.
uint64_t DeriveSeed(uint64_t parent, std::string_view label, uint64_t index = 0);

// Pseudo-random stream with portable distributions. The standard library's
// distribution classes are implementation-defined, so uniform and normal
// variates are produced here directly from the 64-bit engine output.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(Mix64(seed)) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer on [0, n). Lemire's multiply-shift with rejection.
  uint64_t UniformInt(uint64_t n);

  // Inclusive integer range [lo, hi].
  int64_t UniformRange(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(UniformInt(static_cast<uint64_t>(hi - lo) + 1));
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Standard normal via Box-Muller; the second variate is cached.
  double Normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace msunet

#endif  // MSUNET_RNG_H_
