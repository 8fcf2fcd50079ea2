// Counter-based deterministic RNG. A draw is a pure function of
// (seed, counter), so equal seeds give bit-identical sequences no matter
// where the generator runs, and fork() derives independent child streams
// for parallel workers.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace dice {

namespace detail {
inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed) {}

  uint64_t next_u64() {
    ++counter_;
    return detail::mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  // uniform in [0, 1)
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller, caching the second draw
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  // uniform in [0, n) without modulo bias (Lemire multiply-shift)
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // uniform integer in [lo, hi] inclusive
  int next_int(int lo, int hi) {
    return lo + static_cast<int>(next_below(static_cast<uint64_t>(hi - lo) + 1));
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = next_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // independent child stream; child sequences never collide with the
  // parent's for distinct stream tags
  Rng fork(uint64_t stream) const {
    return Rng(detail::mix64(seed_ ^ detail::mix64(stream + 0x632BE59BD9B4E019ULL)));
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_ = 0;
  uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dice
