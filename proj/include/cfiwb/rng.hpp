#pragma once

#include <cstdint>
#include <random>

namespace cfiwb {

/// Uniform draw from [0, bound) with rejection, so sequences do not depend
/// on the standard library's distribution implementation.
inline std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t bound) {
    std::uint64_t threshold = (-bound) % bound;
    while (true) {
        std::uint64_t r = rng();
        if (r >= threshold) return r % bound;
    }
}

} // namespace cfiwb
