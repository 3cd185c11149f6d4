#pragma once

#include <cstdint>
#include <vector>

#include "matchrdma/rng.hpp"
#include "matchrdma/sim_time.hpp"

namespace matchrdma {

// Alternating compute/communication iterations with barrier semantics, plus
// optional Poisson intra-DC background traffic for the mixed scenario.
struct WorkloadConfig {
    std::uint64_t msg_size = 8 * 1024 * 1024;
    std::uint32_t concurrency = 4;
    std::uint32_t iterations = 10;
    SimTime compute_time = 5 * kMillisecond;
    double jitter_pct = 0.0;  // uniform +/- applied to sizes and compute gaps
    double intra_dc_load = 0.0;
    bool continuous = false;  // iterate until the run horizon, not a count
    std::uint64_t bg_min_size = 4 * 1024;
    std::uint64_t bg_max_size = 1024 * 1024;
};

struct PlannedMessage {
    std::uint64_t size;
    std::uint32_t src_server;  // index within the sending DC
    std::uint32_t dst_server;  // index within the receiving DC
};

struct IterationPlan {
    SimTime compute_gap;
    std::vector<PlannedMessage> messages;
};

struct WorkloadPlan {
    std::vector<IterationPlan> iterations;
};

// Pure function of (config, counts, seed): per-iteration jittered sizes and
// gaps with round-robin server assignment. Issue times are decided at run
// time by the barrier (iteration i+1 starts only after all of i completed).
WorkloadPlan generate_schedule(const WorkloadConfig& cfg, std::uint32_t src_servers,
                               std::uint32_t dst_servers, std::uint64_t seed);

// Poisson background generator: log-uniform sizes (geometric-mean median)
// at an arrival rate sized so offered load matches the requested fraction
// of the DC's aggregate server-edge capacity.
class BackgroundGenerator {
  public:
    BackgroundGenerator(const WorkloadConfig& cfg, std::uint32_t servers,
                        double aggregate_edge_bps, std::uint64_t seed);

    bool enabled() const { return rate_per_ns_ > 0.0; }
    double mean_size_bytes() const { return mean_size_; }

    struct Arrival {
        SimTime at;
        std::uint64_t size;
        std::uint32_t src_server;
        std::uint32_t dst_server;
    };
    Arrival next(SimTime after);

  private:
    Rng rng_;
    std::uint32_t servers_;
    double rate_per_ns_ = 0.0;
    double mean_size_ = 0.0;
    std::uint64_t min_size_, max_size_;
};

}  // namespace matchrdma
