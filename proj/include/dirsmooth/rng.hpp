#pragma once

#include <cmath>
#include <cstdint>

namespace dirsmooth {

namespace detail {

// splitmix64 output mixer (Steele, Lea & Flood)
inline std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

} // namespace detail

/// Counter-based generator ("splitmix64-counter"): the stream is keyed by
/// (seed, stream, index), so a draw's randomness depends only on its key and
/// not on how work was scheduled across threads.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
        : state_(detail::mix64(detail::mix64(detail::mix64(seed + 0x9E3779B97F4A7C15ULL)
                                             + stream) + index)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }

    result_type operator()() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return detail::mix64(state_);
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1] (safe as a log() argument).
    double uniform_pos() {
        return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

private:
    std::uint64_t state_;
};

/// Generator tag written into run manifests.
inline constexpr const char* kGeneratorName = "splitmix64-counter-v1";

} // namespace dirsmooth
