#pragma once

#include <array>
#include <cstdint>

namespace ifyot {

// xoshiro256++ stream seeded through splitmix64. Chosen over std::mt19937 +
// std::normal_distribution because the standard distributions are
// implementation-defined; this generator produces the same stream on every
// platform, which the determinism guarantees rely on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on (0, 1], 53-bit resolution. Never returns 0 so log() is safe.
  double uniform01();

  // Standard normal via Box-Muller; consumes two uniforms per pair.
  double normal();

  // Derived stream for an independent subtask: mixes (base_seed, task_index)
  // through splitmix64 so neighbouring indices give unrelated streams.
  static std::uint64_t task_seed(std::uint64_t base_seed,
                                 std::uint64_t task_index);

 private:
  std::array<std::uint64_t, 4> s_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace ifyot
