#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace digdec {

/**
 * Seeded random source.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the C++
 * standard. Uniform doubles are built from the top 53 bits directly instead
 * of std::uniform_real_distribution, whose algorithm is implementation
 * defined; this keeps runs reproducible across standard libraries.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Index drawn from a probability vector by inverse CDF.
  std::size_t categorical(std::span<const double> probs) {
    double u = uniform();
    double c = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      c += probs[i];
      last = i;
      if (u < c) return i;
    }
    return last;
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace digdec
