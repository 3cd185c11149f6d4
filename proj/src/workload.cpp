#include "matchrdma/workload.hpp"

#include <algorithm>
#include <cmath>

#include "matchrdma/event_engine.hpp"

namespace matchrdma {

WorkloadPlan generate_schedule(const WorkloadConfig& cfg, std::uint32_t src_servers,
                               std::uint32_t dst_servers, std::uint64_t seed) {
    if (cfg.msg_size == 0) throw SimulationError("workload msg_size must be >= 1");
    if (cfg.concurrency == 0 || src_servers == 0 || dst_servers == 0) {
        throw SimulationError("workload counts must be >= 1");
    }
    Rng rng(seed, /*stream=*/0xA1C8);
    const double jit = cfg.jitter_pct / 100.0;

    WorkloadPlan plan;
    plan.iterations.reserve(cfg.iterations);
    for (std::uint32_t i = 0; i < cfg.iterations; ++i) {
        IterationPlan it;
        const double gap_scale = jit > 0 ? rng.uniform(1.0 - jit, 1.0 + jit) : 1.0;
        it.compute_gap =
            static_cast<SimTime>(std::llround(static_cast<double>(cfg.compute_time) * gap_scale));
        it.messages.reserve(cfg.concurrency);
        for (std::uint32_t j = 0; j < cfg.concurrency; ++j) {
            PlannedMessage m;
            const double size_scale = jit > 0 ? rng.uniform(1.0 - jit, 1.0 + jit) : 1.0;
            m.size = std::max<std::uint64_t>(
                1, static_cast<std::uint64_t>(
                       std::llround(static_cast<double>(cfg.msg_size) * size_scale)));
            // round-robin assignment on both sides: concurrent messages can
            // share a queue pair and serialize on it, as real collectives do
            m.src_server = j % src_servers;
            m.dst_server = j % dst_servers;
            it.messages.push_back(m);
        }
        plan.iterations.push_back(std::move(it));
    }
    return plan;
}

BackgroundGenerator::BackgroundGenerator(const WorkloadConfig& cfg, std::uint32_t servers,
                                         double aggregate_edge_bps, std::uint64_t seed)
    : rng_(seed, /*stream=*/0xB6), servers_(servers),
      min_size_(cfg.bg_min_size), max_size_(cfg.bg_max_size) {
    if (cfg.intra_dc_load <= 0.0) return;
    // mean of a log-uniform on [a, b] is (b - a) / ln(b / a)
    const double a = static_cast<double>(min_size_);
    const double b = static_cast<double>(max_size_);
    mean_size_ = (b - a) / std::log(b / a);
    const double offered_Bps = cfg.intra_dc_load * aggregate_edge_bps / 8.0;
    rate_per_ns_ = offered_Bps / mean_size_ * 1e-9;  // arrivals per ns
}

BackgroundGenerator::Arrival BackgroundGenerator::next(SimTime after) {
    Arrival a;
    const double gap_ns = rng_.exponential(rate_per_ns_);
    a.at = after + std::max<SimTime>(1, static_cast<SimTime>(std::llround(gap_ns)));
    a.size = static_cast<std::uint64_t>(std::llround(
        rng_.log_uniform(static_cast<double>(min_size_), static_cast<double>(max_size_))));
    a.src_server = static_cast<std::uint32_t>(rng_.uniform_u64(servers_));
    std::uint32_t dst = static_cast<std::uint32_t>(rng_.uniform_u64(servers_ - 1));
    if (dst >= a.src_server) ++dst;  // never self-to-self
    a.dst_server = dst;
    return a;
}

}  // namespace matchrdma
