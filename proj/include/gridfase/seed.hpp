#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gridfase {

using Rng = std::mt19937_64;

// All randomness in the toolkit derives from one user seed. Each consumer
// hashes (seed, component name, index) into its own stream so that adding a
// consumer never shifts the draws of another.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view component, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t seed, std::string_view component, std::uint64_t index = 0) {
    return Rng(derive_seed(seed, component, index));
}

/// 64-bit FNV-1a, also used as the checkpoint checksum.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace gridfase
