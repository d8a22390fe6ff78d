#pragma once

#include <cstdint>

namespace stabman {

/// Stateless counter-based uniform generator. Every draw is a pure function of
/// (seed, stream, index), so parallel consumers get the same numbers regardless
/// of evaluation order or thread count.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

    [[nodiscard]] std::uint64_t bits(std::uint64_t index) const {
        std::uint64_t z = mix(seed_ ^ mix(stream_ + 0x9e3779b97f4a7c15ULL));
        return mix(z + index * 0xd1b54a32d192ed03ULL);
    }

    /// Uniform on [0, 1) with 53 random bits.
    [[nodiscard]] double uniform(std::uint64_t index) const {
        return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
    }

    [[nodiscard]] double uniform(std::uint64_t index, double lo, double hi) const {
        return lo + (hi - lo) * uniform(index);
    }

    [[nodiscard]] CounterRng substream(std::uint64_t s) const { return CounterRng(seed_, mix(stream_ ^ (s + 1))); }

private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
};

}  // namespace stabman
