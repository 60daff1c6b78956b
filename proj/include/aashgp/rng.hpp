#pragma once

#include <cstdint>
#include <random>

namespace aashgp::rng {

// Independent consumers draw from separate streams so that changing how
// many numbers one of them uses never perturbs the others.
enum class Purpose : std::uint32_t {
    CandidatePool = 1,
    InitialDoe = 2,
    SurrogateMcs = 3,
    Mcs = 4,
    Generic = 5,
};

struct StreamKey {
    std::uint64_t seed = 0;
    Purpose purpose = Purpose::Generic;
    std::uint64_t index = 0;  // e.g. learning iteration
};

// Engine: std::mt19937_64 seeded through std::seed_seq from
// (seed, purpose, index, block). Both algorithms are fully specified by
// the standard, so streams are portable across conforming toolchains.
inline constexpr const char* kGeneratorName = "mt19937_64/seed_seq/v1";

std::mt19937_64 make_engine(const StreamKey& key, std::uint64_t block);

// Uniform double in the open interval (0, 1) with 53 random bits.
inline double uniform_open(std::mt19937_64& engine) {
    return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace aashgp::rng
