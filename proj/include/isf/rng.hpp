#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "isf/common.hpp"

namespace isf {

// Deterministic xoshiro256++ stream. std::mt19937 plus the standard
// distributions are not bit-reproducible across library implementations,
// and checkpoints must replay the exact stream, so the generator and the
// Gaussian transform are pinned here. State is four u64 words that
// serialize losslessly into JSON.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed) {
    // splitmix64 expansion of the seed into the state words
    uint64_t x = seed;
    for (auto& word : state_) {
      x += 0x9e3779b97f4a7c15ull;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      word = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
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

  // uniform double in [0, 1), 53 random bits
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [0, n)
  uint64_t uniform_index(uint64_t n) {
    if (n == 0) throw InvalidArgument("uniform_index: n must be positive");
    // rejection sampling to avoid modulo bias
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  bool coin() { return (next_u64() >> 63) != 0; }

  // standard normal via Box-Muller; draws two uniforms per value so the
  // stream position is a pure function of the call count
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.state_ == b.state_;
  }

 private:
  std::array<uint64_t, 4> state_{};
};

}  // namespace isf
