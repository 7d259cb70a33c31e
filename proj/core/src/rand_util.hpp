#pragma once
#include <cstddef>
#include <cstdint>
#include <random>

namespace gridflux::detail {

// 53-bit uniform in [0, 1). std::uniform_real_distribution is
// implementation-defined, which would break cross-platform reproducibility.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

}  // namespace gridflux::detail
