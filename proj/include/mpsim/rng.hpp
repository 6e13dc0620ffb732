#pragma once

#include <cstdint>
#include <random>

namespace mpsim {

/// Independent random streams per concern, so that e.g. probe tagging never
/// perturbs the demand or routing draws of a run with the same seed.
struct RandomStreams {
    std::mt19937_64 demand;
    std::mt19937_64 routing;
    std::mt19937_64 probes;

    explicit RandomStreams(std::uint64_t seed = 0)
        : demand(derive(seed, 1)), routing(derive(seed, 2)), probes(derive(seed, 3)) {}

    /// Uniform in [0, 1) from the top 53 bits.
    static double uniform(std::mt19937_64& g) {
        return static_cast<double>(g() >> 11) * 0x1.0p-53;
    }

private:
    static std::mt19937_64 derive(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), 0x9e3779b9u};
        return std::mt19937_64(seq);
    }
};

}  // namespace mpsim
