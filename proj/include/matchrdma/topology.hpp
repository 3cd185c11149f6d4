#pragma once

#include <cstdint>
#include <vector>

#include "matchrdma/sim_time.hpp"

namespace matchrdma {

// Dual-AI-DC leaf-spine fabric joined by parallel OTN links. Counts apply
// per datacenter; numbering is deterministic so node ids are stable.
struct TopologyConfig {
    std::uint32_t leaves = 2;
    std::uint32_t spines = 2;
    std::uint32_t servers_per_leaf = 4;
    std::uint32_t otn_parallel_links = 16;
    double server_link_gbps = 100.0;
    double fabric_link_gbps = 100.0;
    double otn_link_gbps = 100.0;
    double dc_facing_gbps = 0.0;  // 0: same as fabric; >0: explicit drain limit per port
    std::uint32_t distance_km = 1000;
    SimTime intra_prop = 1 * kMicrosecond;

    std::uint64_t switch_queue_capacity = 1024 * 1024;
    std::uint64_t otn_egress_queue_capacity = 4 * 1024 * 1024;

    std::uint32_t servers_per_dc() const { return leaves * servers_per_leaf; }
    SimTime otn_prop() const { return propagation_delay_km(distance_km); }
    double aggregate_otn_bps() const { return otn_parallel_links * otn_link_gbps * 1e9; }
    double aggregate_server_edge_bps() const { return servers_per_dc() * server_link_gbps * 1e9; }
};

// Deterministic node-id layout: per DC d in {0,1}:
//   servers, then leaves, then spines, then the OTN edge.
struct TopologyLayout {
    std::uint32_t per_dc;
    std::uint32_t leaves, spines, servers_per_leaf;

    explicit TopologyLayout(const TopologyConfig& cfg)
        : per_dc(cfg.servers_per_dc() + cfg.leaves + cfg.spines + 1),
          leaves(cfg.leaves),
          spines(cfg.spines),
          servers_per_leaf(cfg.servers_per_leaf) {}

    std::uint16_t server(std::uint32_t dc, std::uint32_t idx) const {
        return static_cast<std::uint16_t>(dc * per_dc + idx);
    }
    std::uint16_t leaf(std::uint32_t dc, std::uint32_t idx) const {
        return static_cast<std::uint16_t>(dc * per_dc + leaves * servers_per_leaf + idx);
    }
    std::uint16_t spine(std::uint32_t dc, std::uint32_t idx) const {
        return static_cast<std::uint16_t>(dc * per_dc + leaves * servers_per_leaf + leaves + idx);
    }
    std::uint16_t otn_edge(std::uint32_t dc) const {
        return static_cast<std::uint16_t>(dc * per_dc + leaves * servers_per_leaf + leaves +
                                          spines);
    }
    std::uint32_t total_nodes() const { return 2 * per_dc; }
    std::uint32_t dc_of_server(std::uint16_t id) const { return id >= per_dc ? 1u : 0u; }
    std::uint32_t leaf_of_server_idx(std::uint32_t idx) const { return idx / servers_per_leaf; }
};

}  // namespace matchrdma
