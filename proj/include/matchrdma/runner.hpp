#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matchrdma/metrics.hpp"
#include "matchrdma/scenario.hpp"

namespace matchrdma {

// Builds, runs and audits one scenario.
MetricsRecord run_scenario(const ScenarioConfig& cfg);

// Cartesian sweep axes expanded against a base scenario. Empty axes inherit
// the base value. Rows come out in deterministic grid order regardless of
// execution order; failed points carry an error code in their row.
struct SweepGrid {
    std::vector<std::uint32_t> distances_km;
    std::vector<std::uint64_t> msg_sizes;
    std::vector<std::uint32_t> concurrencies;
    std::vector<SchemeId> schemes;
    std::vector<std::uint64_t> seeds;
};

SweepGrid parse_grid(const std::string& spec);
SweepGrid default_grid();

std::vector<MetricsRecord> run_sweep(const ScenarioConfig& base, const SweepGrid& grid,
                                     unsigned jobs = 1);

}  // namespace matchrdma
