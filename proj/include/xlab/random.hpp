#pragma once

#include <cstdint>
#include <random>

namespace xlab {

// Engine for one (seed, stream, index) triple. Every sample / trial /
// participant gets its own engine, so results never depend on how work is
// scheduled across threads.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

// Named streams keep unrelated consumers of the same seed independent.
namespace stream {
inline constexpr std::uint64_t kResponses = 0x7265737000000001ULL;
inline constexpr std::uint64_t kGpMasks = 0x67706d6100000002ULL;
inline constexpr std::uint64_t kBootstrap = 0x626f6f7400000003ULL;
inline constexpr std::uint64_t kSynthTrial = 0x73796e7400000004ULL;
inline constexpr std::uint64_t kSynthDrawer = 0x6472617700000005ULL;
inline constexpr std::uint64_t kSynthResponse = 0x7372657300000006ULL;
inline constexpr std::uint64_t kOutlier = 0x6f75746c00000007ULL;
inline constexpr std::uint64_t kSynthClass = 0x636c617300000008ULL;
}  // namespace stream

}  // namespace xlab
