#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace stg {

std::uint64_t splitmix64(std::uint64_t x);

/// Deterministic seed for a sub-stream identified by a tuple of integers,
/// e.g. (global seed, epoch, sample index).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

inline std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> parts) {
  return std::mt19937_64(derive_seed(parts));
}

}  // namespace stg
