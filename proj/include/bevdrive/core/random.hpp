#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bevdrive {

/// Deterministic RNG wrapper. All randomness in the project flows through
/// explicitly seeded instances of this class; distributions are hand-rolled
/// so sequences are stable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0)
      : gen_(seed ^ 0x9e3779b97f4a7c15ull), state_seed_(seed) {}

  /// Derive an independent child stream (e.g. one per episode or module).
  Rng child(std::uint64_t stream) const {
    const std::uint64_t s = state_seed_ ^ (0xbf58476d1ce4e5b9ull * (stream + 1));
    return Rng(s);
  }

  std::uint64_t bits() { return gen_(); }

  double uniform(double lo = 0.0, double hi = 1.0) {
    const double u = static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
    return lo + u * (hi - lo);
  }

  /// Integer in [lo, hi] inclusive.
  int uniformInt(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(gen_() % span);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 6.283185307179586 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return mean + stddev * r * std::cos(th);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
      const auto j = static_cast<decltype(i)>(gen_() % static_cast<std::uint64_t>(i + 1));
      std::swap(first[i], first[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t state_seed_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace bevdrive
