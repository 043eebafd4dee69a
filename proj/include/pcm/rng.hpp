#pragma once

#include <cstdint>
#include <random>

namespace pcm {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based child seed: the same (master, stream, index) always yields the
// same seed, independent of the order in which children are requested.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
    return splitmix64(splitmix64(splitmix64(master) ^ (stream * 0xd1b54a32d192ed03ULL)) ^ index);
}

namespace stream {
inline constexpr std::uint64_t tuning = 1;
inline constexpr std::uint64_t imputation = 2;
inline constexpr std::uint64_t smo = 3;
inline constexpr std::uint64_t bootstrap_resample = 4;
inline constexpr std::uint64_t bootstrap_fit = 5;
inline constexpr std::uint64_t study_data = 6;
inline constexpr std::uint64_t study_fit = 7;
inline constexpr std::uint64_t roc_imputation = 8;
}  // namespace stream

}  // namespace pcm
