#pragma once

#include <cstdint>
#include <random>

namespace trialkit {

// Addressable randomness: equal (seed, stream_id) pairs replay bit-identical
// draw sequences. Simulations that run in parallel take disjoint stream ids
// and combine tallies by addition.
struct SeededStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

class Rng {
 public:
  explicit Rng(SeededStream stream) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(stream.seed),
        static_cast<std::uint32_t>(stream.seed >> 32),
        static_cast<std::uint32_t>(stream.stream_id),
        static_cast<std::uint32_t>(stream.stream_id >> 32),
    };
    engine_.seed(seq);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1). Endpoints are excluded so that
  // inverse-CDF transforms stay finite.
  double uniform01() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace trialkit
