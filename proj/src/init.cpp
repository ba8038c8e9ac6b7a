#include "wagf/init.hpp"

#include <cmath>

WAGF_BEGIN_NAMESPACE

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(seed) ^ h);
}

Tensor normal(const Shape& shape, Real stddev, Rng& rng) {
  Tensor t(shape);
  std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
  for (auto& v : t.data()) v = static_cast<Real>(dist(rng));
  return t;
}

Tensor uniform(const Shape& shape, Real lo, Real hi, Rng& rng) {
  Tensor t(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data()) v = static_cast<Real>(dist(rng));
  return t;
}

Tensor he_normal(const Shape& shape, std::size_t fan_in, Rng& rng) {
  return normal(shape, static_cast<Real>(std::sqrt(2.0 / static_cast<double>(fan_in))), rng);
}

Tensor glorot_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const auto limit = static_cast<Real>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
  return uniform(shape, -limit, limit, rng);
}

WAGF_END_NAMESPACE
