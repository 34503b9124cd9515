#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace paad {

// Deterministic splitmix64 generator. Used everywhere instead of <random>
// distributions so that identical seeds give identical byte streams on any
// platform. derive() builds independent sub-streams from a master seed, so
// e.g. camera corruption draws never perturb the LiDAR draws of a frame.
struct Rng {
  uint64_t state = 0x9e3779b97f4a7c15ull;

  Rng() = default;
  explicit Rng(uint64_t seed) : state(seed + 0x9e3779b97f4a7c15ull) {}

  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t next_u64() {
    state += 0x9e3779b97f4a7c15ull;
    return mix(state);
  }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased-enough multiply-shift bound; n must be > 0
  uint64_t next_below(uint64_t n) {
    return uint64_t((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller, no cached spare so the draw count per call is fixed
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Independent stream keyed by a path of integers under a master seed.
  static Rng derive(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t h = mix(seed + 0x9e3779b97f4a7c15ull);
    for (uint64_t v : path) h = mix(h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
    Rng r;
    r.state = h;
    return r;
  }
};

// Stream tags for Rng::derive paths.
enum StreamTag : uint64_t {
  kStreamWorld = 1,
  kStreamFault = 2,
  kStreamPlan = 3,
  kStreamOcclusionCamera = 4,
  kStreamOcclusionLidar = 5,
  kStreamInit = 6,
  kStreamTrain = 7,
  kStreamNoise = 8,
};

}  // namespace paad
