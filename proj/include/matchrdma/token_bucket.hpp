#pragma once

#include <algorithm>
#include <cstdint>

#include "matchrdma/sim_time.hpp"

namespace matchrdma {

// Budget gate: linear refill at the installed rate-budget, capped at a small
// burst so admitted bytes over any interval stay within refill + burst.
class TokenBucket {
  public:
    void configure(double fill_rate_bps, double burst_bits, SimTime now) {
        refill(now);
        fill_rate_bps_ = fill_rate_bps;
        burst_bits_ = burst_bits;
        tokens_ = std::min(tokens_, burst_bits_);
    }

    void set_fill_rate(double bps, SimTime now) {
        refill(now);
        fill_rate_bps_ = bps;
    }

    bool try_consume(std::uint64_t bytes, SimTime now) {
        refill(now);
        const double bits = static_cast<double>(bytes) * 8.0;
        if (tokens_ + 1e-9 < bits) return false;
        tokens_ -= bits;
        return true;
    }

    // Time until `bytes` worth of tokens will be available (0 if already).
    SimTime ns_until_available(std::uint64_t bytes, SimTime now) {
        refill(now);
        const double bits = static_cast<double>(bytes) * 8.0;
        if (tokens_ >= bits) return 0;
        if (fill_rate_bps_ <= 0.0) return 365LL * 24 * 3600 * kSecond;
        const double ns = (bits - tokens_) * 1e9 / fill_rate_bps_;
        return static_cast<SimTime>(ns) + 1;
    }

    double tokens_bits(SimTime now) {
        refill(now);
        return tokens_;
    }
    double fill_rate_bps() const { return fill_rate_bps_; }
    double burst_bits() const { return burst_bits_; }

  private:
    void refill(SimTime now) {
        if (now > last_refill_) {
            tokens_ = std::min(
                burst_bits_,
                tokens_ + fill_rate_bps_ * static_cast<double>(now - last_refill_) * 1e-9);
            last_refill_ = now;
        }
    }

    double fill_rate_bps_ = 0.0;
    double burst_bits_ = 0.0;
    double tokens_ = 0.0;
    SimTime last_refill_ = 0;
};

}  // namespace matchrdma
