#pragma once

#include "flowseg/tensor.hpp"

#include <array>
#include <cstdint>

namespace flowseg {

// xoshiro256++ with splitmix64 seeding. Splittable: split(key) derives an
// independent child stream from (root seed, key) only, never from the draw
// position, so replays are exact regardless of evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  // uniform in [0,1), 53-bit resolution
  double uniform();
  double uniform(double lo, double hi);

  // uniform integer in [0,n), n >= 1
  std::uint64_t below(std::uint64_t n);

  // standard normal via Box-Muller; consumes exactly two uniforms per call
  double normal();

  Rng split(std::uint64_t key) const;
  std::uint64_t seed() const { return seed_; }

  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);

 private:
  std::uint64_t seed_ = 0;
  std::array<std::uint64_t, 4> state_{};
};

Tensor randn(const Shape& shape, Rng& rng);
Tensor rand_uniform(const Shape& shape, Rng& rng, double lo, double hi);

}  // namespace flowseg
