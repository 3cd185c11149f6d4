#pragma once

#include <algorithm>
#include <cstdint>

#include "matchrdma/sim_time.hpp"

namespace matchrdma {

struct DcqcnConfig {
    double g = 1.0 / 16.0;
    SimTime alpha_timer = 55 * kMicrosecond;
    SimTime increase_timer = 55 * kMicrosecond;
    std::uint64_t byte_counter = 10 * 1000 * 1000;
    std::uint32_t fast_recovery_events = 5;  // F
    double rate_ai_bps = 5e6;                // R_AI
    double min_rate_bps = 100e6;
};

// Per-connection DCQCN sender state. The update rules are the standard
// alpha-estimate / multiplicative-decrease / staged-increase design; the
// THEMIS-like baseline rescales g and R_AI per flow RTT before use.
struct DcqcnState {
    double current_rate_bps = 0.0;
    double target_rate_bps = 0.0;
    double alpha = 0.0;
    double line_rate_bps = 0.0;
    std::uint32_t stage = 0;  // increase events since the last decrease
    bool cnp_since_alpha_tick = false;
    bool ever_cnp = false;
    std::uint64_t bytes_since_increase = 0;

    double g = 1.0 / 16.0;
    double rate_ai_bps = 5e6;
    double min_rate_bps = 100e6;

    void init(double line_bps, const DcqcnConfig& cfg, double rtt_ratio = 1.0) {
        line_rate_bps = line_bps;
        current_rate_bps = line_bps;
        target_rate_bps = line_bps;
        g = cfg.g / rtt_ratio;
        rate_ai_bps = cfg.rate_ai_bps * rtt_ratio;
        min_rate_bps = cfg.min_rate_bps;
    }

    void on_cnp() {
        ever_cnp = true;
        cnp_since_alpha_tick = true;
        alpha = (1.0 - g) * alpha + g;
        const double prev = current_rate_bps;
        current_rate_bps = std::max(min_rate_bps, current_rate_bps * (1.0 - alpha / 2.0));
        target_rate_bps = prev;
        stage = 0;
        bytes_since_increase = 0;
    }

    void on_alpha_timer() {
        if (!cnp_since_alpha_tick) alpha *= (1.0 - g);
        cnp_since_alpha_tick = false;
    }

    void on_increase_event(std::uint32_t fast_recovery_events) {
        ++stage;
        if (stage > fast_recovery_events) {
            target_rate_bps = std::min(line_rate_bps, target_rate_bps + rate_ai_bps);
        }
        current_rate_bps =
            std::min(line_rate_bps, (current_rate_bps + target_rate_bps) / 2.0);
    }
};

}  // namespace matchrdma
