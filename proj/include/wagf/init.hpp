#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "wagf/tensor.hpp"

WAGF_BEGIN_NAMESPACE

using Rng = std::mt19937_64;

/// Stable 64-bit seed for a named stream, independent of creation order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

Tensor he_normal(const Shape& shape, std::size_t fan_in, Rng& rng);
Tensor glorot_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor uniform(const Shape& shape, Real lo, Real hi, Rng& rng);
Tensor normal(const Shape& shape, Real stddev, Rng& rng);

WAGF_END_NAMESPACE
