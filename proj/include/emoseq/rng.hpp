#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace emoseq {

// xoshiro256++ with explicit, serializable state. The standard library
// distributions are implementation-defined and keep hidden state, which would
// break bit-exact checkpoint resume, so sampling is done by hand here.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  // Derives an independent stream seed, e.g. per clip: mix(seed, clip_index).
  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    x = splitmix64(x);
    return x;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  float uniform(float lo, float hi) {
    return lo + float(uniform01()) * (hi - lo);
  }

  // Uniform in [0, n). Lemire multiply-shift; bias is negligible for the
  // range sizes used here and the mapping is fully deterministic.
  uint32_t uniform_int(uint32_t n) {
    return uint32_t((static_cast<unsigned __int128>(next_u64() >> 32) * n) >> 32);
  }

  // Standard normal via Box-Muller. Always consumes exactly two draws and
  // keeps no cache, so the stream position is a pure function of call count.
  float normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return float(r * std::cos(6.283185307179586 * u2));
  }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::array<uint64_t, 4> state_{};
};

}  // namespace emoseq
