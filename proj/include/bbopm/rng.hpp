// Counter-based random streams.
//
// Every record gets its own stream keyed by (seed, record_index, lane):
// records can be generated in parallel in any order and still reproduce
// bit-identically. The generator is the splitmix64 state-hash, which is
// counter-based (output n is a fixed mix of state0 + n*gamma), with
// Box-Muller on top for normal deviates. We do not use
// std::normal_distribution because its algorithm is implementation
// defined; frozen test values must survive a stdlib change.
#pragma once

#include <cmath>
#include <cstdint>

#include "bbopm/types.hpp"

namespace bbopm {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}
}  // namespace detail

// Lanes keep independent noise purposes (spin noise, probe noise, ...) on
// disjoint streams even within one record.
enum class RngLane : std::uint64_t { spin = 1, probe = 2, scan = 3 };

class CounterRng {
   public:
    CounterRng(std::uint64_t seed, std::uint64_t record_index, RngLane lane)
        : state_(derive_stream(seed, record_index, static_cast<std::uint64_t>(lane))) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return detail::mix64(state_);
    }

    // Uniform in (0, 1]; never returns 0 so log() below is safe.
    double next_unit() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(next_unit()));
        const double phi = two_pi * next_unit();
        spare_ = r * std::sin(phi);
        have_spare_ = true;
        return r * std::cos(phi);
    }

    Vec3 gaussian3() {
        return {gaussian(), gaussian(), gaussian()};
    }

   private:
    static std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t record,
                                       std::uint64_t lane) {
        std::uint64_t s = detail::mix64(seed + 0x9E3779B97F4A7C15ull);
        s = detail::mix64(s ^ (record + 0xD1B54A32D192ED03ull) * 0x2545F4914F6CDD1Dull);
        s = detail::mix64(s ^ (lane + 0x9536B3F23B8E3C95ull) * 0xFF51AFD7ED558CCDull);
        return s;
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace bbopm
