#pragma once

#include <cstdint>

namespace fastgate {

// splitmix64: counter-based generator used to derive independent streams for
// parallel work items. A stream is identified by (master seed, stream id);
// results do not depend on scheduling order.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  // Stream derivation: mix the stream id into the master seed through one
  // round of the output function so that adjacent ids are decorrelated.
  SplitMix64(std::uint64_t master_seed, std::uint64_t stream_id)
      : state_(mix(master_seed ^ mix(stream_id + 0x9e3779b97f4a7c15ULL))) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as the argument of a logarithm.
  double next_double_open0() { return 1.0 - next_double(); }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace fastgate
