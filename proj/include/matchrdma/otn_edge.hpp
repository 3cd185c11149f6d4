#pragma once

#include <cstdint>
#include <deque>
#include <unordered_map>
#include <vector>

#include "matchrdma/node.hpp"
#include "matchrdma/packet.hpp"
#include "matchrdma/rate_estimator.hpp"
#include "matchrdma/scheme.hpp"
#include "matchrdma/token_bucket.hpp"

namespace matchrdma {

struct OtnConfig {
    EstimatorConfig estimator;
    double bucket_burst_bytes = 2 * 4096.0;
    std::uint64_t staging_xoff = 64 * 1024 * 1024;
    std::uint64_t staging_xon = 32 * 1024 * 1024;
    std::uint64_t proxy_aggregate_onset = 8 * 1024 * 1024;  // total staged bytes
    std::uint64_t proxy_threshold_bytes = 64 * 1024;  // per-connection marking onset
    SimTime cnp_min_interval = 50 * kMicrosecond;
    SimTime budget_valid_for = 4 * kMillisecond;
    SimTime probe_interval = 100 * kMillisecond;
    double control_rate_bps = 1e9;  // reserved subchannel, accounting only
    std::uint64_t dest_buffer_capacity = 64 * 1024 * 1024;
    SimTime relay_min_rto = 1 * kMillisecond;
};

// Relay bookkeeping for one tracked inter-DC connection at the source OTN.
struct ConnectionStateEntry {
    ConnId conn = 0;
    std::uint64_t highest_psn_seen = 0;      // one past the newest DATA accepted
    std::uint64_t highest_psn_forwarded = 0; // one past the newest DATA on the wire
    std::uint64_t highest_psn_pseudo_acked = 0;
    std::uint64_t highest_psn_end_acked = 0;

    struct Buffered {
        std::uint64_t psn;
        std::uint32_t payload;
        std::uint32_t msg_id;
        std::uint8_t msg_last;
    };
    // Packets pseudo-ACKed but not yet end-to-end ACKed, ascending psn.
    std::deque<Buffered> retrans_buffer;
    std::uint64_t retrans_buffer_bytes = 0;

    std::deque<RocePacket> staged;  // admitted from the DC but not yet gated out
    std::uint64_t staged_bytes = 0;

    SimTime last_proxy_cnp = -(1LL << 60);
    SimTime arrival_window_start = 0;   // per-conn arrival-rate estimate
    std::uint64_t arrival_window_bytes = 0;
    double arrival_rate_bps = 0.0;
    SimTime last_end_ack_progress = 0;
    std::uint64_t last_relay_retx_psn = ~0ULL;
    SimTime last_relay_retx_at = -(1LL << 60);
    SimTime relay_rto_deadline = 0;
    bool relay_rto_armed = false;
    std::uint64_t proxy_cnp_count = 0;
};

// Per-direction destination-side estimator runtime.
struct DestEstimator {
    SlotObservation current;
    std::deque<SlotObservation> history;  // activity-bearing slots only
    std::uint64_t slots_closed = 0;
    std::uint64_t slots_since_update = 0;
    bool tightened_this_slot = false;
    bool any_traffic = false;
    bool congestion_seen = false;
    std::uint32_t periods_since_tighten = 1000;
    RateBudget last_sent;
    SimTime last_emit_at = -(1LL << 60);
    std::uint64_t epoch = 0;
    std::uint64_t level_counts[3] = {0, 0, 0};  // active slots by level
    std::uint64_t suppressed_updates = 0;
    SimTime rate_raised_at = -(1LL << 60);
    SimTime last_tighten_at = -(1LL << 60);
    std::uint32_t active_slots_this_period = 0;
    double best_evidenced_bps = 0.0;

    // Pending (egress time, psn) per connection for ACK-return sampling.
    std::unordered_map<ConnId, std::deque<std::pair<std::uint64_t, SimTime>>> pending_acks;
};

// An OTN edge node. For flows leaving its datacenter it plays the source
// role (connection tracking, budget-gated pseudo-ACK, relay retransmission,
// congestion-control proxying); for flows entering, the destination role
// (slot observation, stable-window weighting, budget generation).
class OtnEdgeNode : public Node {
  public:
    OtnEdgeNode(Simulation* sim, NodeId id, const SchemeProfile& profile, const OtnConfig& cfg);

    void on_packet(const RocePacket& pkt) override;
    void on_port_tx(const RocePacket& pkt, Port& port) override;
    void on_timer(const Event& ev) override;

    void set_peer(OtnEdgeNode* peer) { peer_ = peer; }
    void start_control_plane();

    SharedBufferPool& dest_pool() { return dest_pool_; }
    const SchemeProfile& profile() const { return profile_; }
    const OtnConfig& config() const { return cfg_; }

    // Source-side state, exposed for tests and audits.
    ConnectionStateEntry* entry_of(ConnId conn);
    const std::unordered_map<ConnId, ConnectionStateEntry>& table() const { return table_; }
    TokenBucket& gate() { return gate_; }
    double installed_budget_bps() const { return installed_rate_bps_; }
    std::uint64_t installed_epoch() const { return installed_epoch_; }
    SimTime measured_one_way_delay() const { return measured_delay_; }
    std::uint64_t gated_wire_bytes() const { return gated_wire_bytes_; }
    std::uint64_t staging_total_bytes() const { return staging_total_; }
    std::uint64_t retx_queue_size() const { return retx_q_.size(); }

    DestEstimator& estimator() { return est_; }

    // Aggregate rate of this edge's DC-facing ports: an upper bound on any
    // sustainable budget it can promise.
    double dc_facing_aggregate_bps() const;

    struct GateSample {
        SimTime at;
        std::uint64_t gated_bytes;
        double fill_integral_bits;
    };
    const std::vector<GateSample>& gate_samples() const { return gate_samples_; }

    // Control-plane hooks (also exercised directly by unit tests).
    void install_budget(const RateBudget& budget, SimTime now);
    void on_control_message(const Event& ev);

  private:
    // --- source role ---
    void source_on_flow_setup(const RocePacket& pkt);
    void source_on_data(const RocePacket& pkt);
    void source_on_reverse(const RocePacket& pkt);  // end-to-end ACK/NACK/CNP
    void forward_gated(ConnId conn, const RocePacket& pkt);
    void emit_pseudo_ack(ConnectionStateEntry& e);
    void drain_staging();
    void schedule_release();
    void staging_occupancy_changed();
    void relay_retransmit(ConnectionStateEntry& e, std::uint64_t from_psn);
    void maybe_proxy_cnp(ConnectionStateEntry& e, bool ce_seen);
    void arm_relay_rto(ConnectionStateEntry& e);
    SimTime relay_rto() const;
    void sample_gate();

    // --- destination role ---
    void dest_on_data_egress(const RocePacket& pkt);
    void dest_on_reverse(const RocePacket& pkt, bool& absorb);
    void close_slot();
    void emit_budget_update(bool urgent);
    void send_control(ControlOp unused, int kind, std::uint64_t a, std::uint64_t b,
                      double rate_bps);

    SchemeProfile profile_;
    OtnConfig cfg_;
    OtnEdgeNode* peer_ = nullptr;

    std::unordered_map<ConnId, ConnectionStateEntry> table_;
    std::vector<ConnId> rr_order_;  // round-robin release across staged conns
    std::size_t rr_cursor_ = 0;
    std::uint32_t staged_conns_ = 0;  // connections currently holding backlog
    std::uint64_t staging_total_ = 0;
    bool staging_xoff_sent_ = false;
    std::deque<RocePacket> retx_q_;  // relay retransmissions, gated first
    TokenBucket gate_;
    double installed_rate_bps_ = 0.0;
    std::uint64_t installed_epoch_ = 0;
    SimTime installed_at_ = 0;
    SimTime installed_valid_for_ = 0;
    bool release_scheduled_ = false;
    std::uint64_t gated_wire_bytes_ = 0;
    double gate_fill_integral_bits_ = 0.0;
    SimTime last_fill_change_ = 0;
    std::vector<GateSample> gate_samples_;

    DestEstimator est_;
    SharedBufferPool dest_pool_;
    CongestionLevel last_peer_level_ = CongestionLevel::kLow;
    Rng proxy_rng_;

    SimTime measured_delay_ = 0;
};

}  // namespace matchrdma
