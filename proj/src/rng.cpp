#include "flowseg/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace flowseg {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int k) {
  return (v << k) | (v >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& s : state_) s = splitmix64(x);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be >= 1");
  return static_cast<std::uint64_t>((static_cast<__uint128_t>(next()) * n) >> 64);
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0,1], keeps log finite
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t Rng::derive_seed(std::uint64_t seed, std::uint64_t key) {
  std::uint64_t x = seed ^ (0xD1B54A32D192ED03ull * (key + 1));
  std::uint64_t h = splitmix64(x);
  return splitmix64(x) ^ h;
}

Rng Rng::split(std::uint64_t key) const {
  return Rng(derive_seed(seed_, key));
}

Tensor randn(const Shape& shape, Rng& rng) {
  Eigen::ArrayXd d(shape_numel(shape));
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = rng.normal();
  return Tensor(shape, std::move(d));
}

Tensor rand_uniform(const Shape& shape, Rng& rng, double lo, double hi) {
  Eigen::ArrayXd d(shape_numel(shape));
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = rng.uniform(lo, hi);
  return Tensor(shape, std::move(d));
}

}  // namespace flowseg
