#include "aashgp/rng.hpp"

#include <array>

namespace aashgp::rng {

std::mt19937_64 make_engine(const StreamKey& key, std::uint64_t block) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    const std::array<std::uint32_t, 7> words{lo(key.seed),  hi(key.seed),
                                             static_cast<std::uint32_t>(key.purpose),
                                             lo(key.index), hi(key.index),
                                             lo(block),     hi(block)};
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

}  // namespace aashgp::rng
