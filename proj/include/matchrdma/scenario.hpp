#pragma once

#include <cstdint>
#include <string>

#include "matchrdma/otn_edge.hpp"
#include "matchrdma/scheme.hpp"
#include "matchrdma/topology.hpp"
#include "matchrdma/transport.hpp"
#include "matchrdma/workload.hpp"

namespace matchrdma {

// Mid-run change of the receiving DC's forwarding capability: at `at`, every
// DC-facing port of the destination OTN edge is re-rated so the aggregate
// drain becomes `post_gbps`.
struct DrainSchedule {
    bool enabled = false;
    SimTime at = 0;
    double pre_gbps = 0.0;  // 0: leave the built topology rate
    double post_gbps = 0.0;
};

// Fully determines a run together with nothing else.
struct ScenarioConfig {
    std::string id = "scenario";
    SchemeId scheme = SchemeId::kMatchRdma;
    std::uint64_t seed = 1;
    TopologyConfig topology;
    TransportConfig transport;
    OtnConfig otn;
    WorkloadConfig workload;
    DrainSchedule drain;
    SimTime max_duration = 2 * kSecond;
    bool trace = false;
    std::string trace_dir = ".";
    bool otn_theta_ack_set = false;  // explicit override of the auto 3x base RTT

    std::string scenario_id() const;
};

// JSON round-trip (nested sections, every default overridable).
ScenarioConfig scenario_from_json(const std::string& json_text);
std::string scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_file(const std::string& path);

// Accepts plain bytes or binary suffixes ("4KB", "8MB").
std::uint64_t parse_size_bytes(const std::string& text);

}  // namespace matchrdma
