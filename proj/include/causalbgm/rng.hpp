#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace causalbgm {

// Deterministic seeded random stream. Uniforms come straight from
// std::mt19937_64; normals use an explicit Box-Muller transform so draw
// sequences do not depend on the standard library's distribution
// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from (master_seed, name). Used for the named
  // stages: "data", "init", "train", "mcmc", "estimate".
  static Rng substream(std::uint64_t master_seed, std::string_view name);

  // Independent stream derived from this stream's seed and an index (e.g. one
  // stream per individual). Does not advance this stream.
  Rng fork(std::uint64_t index) const;

  std::uint64_t next_u64() { return engine_(); }
  double uniform();      // [0, 1)
  double uniform_pos();  // (0, 1]
  double normal();       // N(0, 1)
  double rademacher();   // +1 or -1, equiprobable

  std::uint64_t seed() const { return seed_; }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Stateless 64-bit mixing of two values (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t hash_name(std::string_view name);

}  // namespace causalbgm
