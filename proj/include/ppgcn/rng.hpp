#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ppgcn {

// All randomness derives from one run seed through named sub-streams
// ("split", "sampler", "init", "kmedoids", ...), so each component can be
// re-run in isolation and still see the same draws.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) noexcept;

inline std::mt19937_64 make_rng(std::uint64_t seed, std::string_view stream) {
  return std::mt19937_64(derive_seed(seed, stream));
}

// Uniform index in [0, n); n must be positive.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace ppgcn
