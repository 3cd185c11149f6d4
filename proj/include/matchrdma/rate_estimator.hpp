#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "matchrdma/sim_time.hpp"

namespace matchrdma {

enum class CongestionLevel : std::uint8_t { kLow, kMed, kHigh };

const char* to_string(CongestionLevel level);

// One fixed-length destination-side observation interval.
struct SlotObservation {
    std::uint64_t slot_index = 0;
    SimTime start = 0;
    SimTime slot_len = 0;
    std::uint64_t delivered_bytes = 0;  // egressed into the receiving DC
    std::uint64_t ack_return_count = 0;
    SimTime ack_return_sum = 0;  // sum of DATA-egress -> covering-ACK deltas
    std::uint64_t cnp_count = 0;
    CongestionLevel level = CongestionLevel::kLow;

    SimTime mean_ack_return() const {
        return ack_return_count ? ack_return_sum / static_cast<SimTime>(ack_return_count) : 0;
    }
    double delivered_bps() const {
        return slot_len > 0 ? static_cast<double>(delivered_bytes) * 8e9 / static_cast<double>(slot_len)
                            : 0.0;
    }
};

struct EstimatorConfig {
    SimTime slot_len = 100 * kMicrosecond;
    std::uint32_t history_slots = 64;
    std::uint32_t min_stable_window = 8;  // W
    double cv_epsilon = 0.1;
    double weight_stable = 4.0;
    double weight_jitter = 1.0;
    double beta = 0.5;               // reactive tightening factor on HIGH
    double headroom = 0.95;
    double rate_floor_bps = 1e9;
    double capacity_bps = 16 * 100e9;
    std::uint32_t update_every_slots = 10;  // U
    double suppress_delta = 0.05;           // skip near-identical updates
    SimTime theta_ack = 24 * kMicrosecond;  // 3x intra-DC base RTT by default
    double theta_cnp_per_ms = 120.0;
    // Multiplicative probe applied while uncongested and gate-limited; the
    // estimator can only observe what the source gate admits, so without a
    // probe term the budget could never rise above its own previous value.
    double probe_growth = 1.08;
    double probe_growth_cold = 2.0;   // before any MED/HIGH has been seen
    std::uint32_t probe_hold_after_tighten = 2;  // periods
    // While cold, doublings may pipeline ahead of the 2D evidence loop up to
    // this ratio over the best evidenced rate.
    double probe_pipeline_cap = 8.0;
};

// Destination-estimated sustainable inter-DC injection rate.
struct RateBudget {
    double rate_bps = 0.0;
    std::uint64_t epoch = 0;
    SimTime issued_at = 0;
    SimTime valid_for = 4 * kMillisecond;
};

// HIGH when either the ACK-return or the CNP-frequency threshold is crossed;
// LOW only when the slot is quiet on both counts; MED otherwise. Slots with
// no samples and nothing delivered are LOW.
CongestionLevel classify_slot(const SlotObservation& obs, const EstimatorConfig& cfg);

struct SlotRun {
    std::size_t first = 0;
    std::size_t count = 0;
    bool stable = false;
};

// Greedy left-to-right partition of the history into stable windows (runs of
// at least W consecutive slots whose delivered-rate coefficient of variation
// stays below epsilon and whose levels never reach HIGH) and jitter slots.
// The scan grows each candidate run until the first violating slot, which
// makes the partition unique and covering.
std::vector<SlotRun> detect_stable_windows(const std::deque<SlotObservation>& history,
                                           const EstimatorConfig& cfg);

struct EstimateInputs {
    CongestionLevel current_level = CongestionLevel::kLow;
    double last_sent_bps = 0.0;       // what the source currently enforces
    double recent_delivered_bps = 0.0;  // mean over the last budget period's active slots
    bool congestion_seen = false;
    std::uint32_t periods_since_tighten = 0;
};

// Slot-weighted budget: stable-window slots at full weight, jitter slots
// conservatively via their p25 delivered rate (nearest-rank), then reactive
// beta-tightening on HIGH, probe growth while gate-limited and LOW, and the
// headroom/floor/capacity clamp.
RateBudget estimate_rate_budget(const std::deque<SlotObservation>& history,
                                const std::vector<SlotRun>& partition,
                                const EstimateInputs& inputs, const RateBudget& prev,
                                const EstimatorConfig& cfg);

// Nearest-rank percentile: rank = ceil(p * n), 1-indexed on the sorted data.
double percentile_nearest_rank(std::vector<double> values, double p);

// Population coefficient of variation; 0 when all values are equal
// (including the all-zero case).
double coefficient_of_variation(const double* values, std::size_t n);

}  // namespace matchrdma
