#pragma once

#include <cstdint>

namespace matchrdma {

// Simulation clock in integer nanoseconds. All configured delays (1 us
// intra-DC hops, 5 us/km of fiber, slot lengths) are exact in this unit.
using SimTime = std::int64_t;

constexpr SimTime kNanosecond = 1;
constexpr SimTime kMicrosecond = 1000;
constexpr SimTime kMillisecond = 1000 * 1000;
constexpr SimTime kSecond = 1000LL * 1000 * 1000;

constexpr SimTime from_us(std::int64_t us) { return us * kMicrosecond; }
constexpr SimTime from_ms(std::int64_t ms) { return ms * kMillisecond; }
constexpr SimTime from_sec(std::int64_t s) { return s * kSecond; }

// 5 us of one-way fiber propagation per kilometer.
constexpr SimTime propagation_delay_km(std::int64_t km) { return km * 5 * kMicrosecond; }

// Exact serialization time of `bytes` at `rate_bps`, in fractional ns.
// Event scheduling rounds through a per-port picosecond accumulator so the
// long-run average stays exact; this closed form is the reference value.
constexpr double serialization_ns(std::int64_t bytes, double rate_bps) {
    return static_cast<double>(bytes) * 8.0 * 1e9 / rate_bps;
}

constexpr std::int64_t serialization_ps(std::int64_t bytes, double rate_bps) {
    return static_cast<std::int64_t>(static_cast<double>(bytes) * 8.0 * 1e12 / rate_bps + 0.5);
}

}  // namespace matchrdma
