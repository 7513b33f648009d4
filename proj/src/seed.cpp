#include "gridfase/seed.hpp"

namespace gridfase {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view component, std::uint64_t index) {
    const std::uint64_t name_hash = fnv1a64(component.data(), component.size());
    return splitmix64(splitmix64(seed ^ name_hash) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

}  // namespace gridfase
