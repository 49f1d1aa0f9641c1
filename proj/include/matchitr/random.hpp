#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace matchitr {

// splitmix64 finalizer; used to derive decorrelated sub-seeds from a base seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream ^ 0x51ed2701a7f8b3c5ull));
}

// mt19937_64 with hand-rolled variate transforms. std::*_distribution is not
// reproducible across standard libraries, and output files must be
// byte-identical for a given seed, so the transforms are fixed here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0,1), 53-bit resolution.
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1); rejects exact zeros (probability 2^-53 per draw).
  double uniform_pos() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential(double rate) {
    if (rate <= 0.0) throw std::invalid_argument("exponential rate must be positive");
    return -std::log(uniform_pos()) / rate;
  }

  // Uniform integer in [0, n). Modulo bias is < n/2^64, irrelevant here.
  std::size_t below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below(0)");
    return std::size_t(engine_() % n);
  }

  // Draw from a discrete distribution given (unnormalized) nonnegative weights.
  int categorical(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return int(i);
    }
    return int(w.size()) - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace matchitr
