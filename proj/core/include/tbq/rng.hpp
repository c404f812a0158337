#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tbq {

/* Domain-separated seed derivation: one master seed fans out into
 * independent streams ("rot" for the rotation, "qjl" for the sketch, trial
 * indices for Monte-Carlo runs) so every artifact is reproducible on its own.
 * splitmix64 finalization over an FNV-1a hash of the domain tag. */
uint64_t derive_seed(uint64_t master, std::string_view domain,
                     uint64_t index = 0);

/* Deterministic standard-normal stream.
 *
 * mt19937_64 is fully pinned by the standard; the normal transform
 * (Marsaglia polar on 53-bit uniforms) is implemented here because
 * std::normal_distribution's algorithm is implementation-defined and index
 * files regenerate their matrices from the recorded seed. */
class GaussianStream {
 public:
  explicit GaussianStream(uint64_t seed) : gen_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double v1, v2, s;
    do {
      v1 = 2.0 * uniform01() - 1.0;
      v2 = 2.0 * uniform01() - 1.0;
      s = v1 * v1 + v2 * v2;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v2 * f;
    have_spare_ = true;
    return v1 * f;
  }

  void fill(double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = next();
  }

  /* Uniform in [0, 1), 53 random bits. */
  double uniform01() { return double(gen_() >> 11) * 0x1.0p-53; }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tbq
