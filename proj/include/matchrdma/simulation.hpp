#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "matchrdma/event_engine.hpp"
#include "matchrdma/metrics.hpp"
#include "matchrdma/node.hpp"
#include "matchrdma/otn_edge.hpp"
#include "matchrdma/scenario.hpp"
#include "matchrdma/topology.hpp"
#include "matchrdma/transport.hpp"
#include "matchrdma/workload.hpp"

namespace matchrdma {

class ServerNode;

// A connection (queue pair) with its static forward/reverse path. Paths are
// fixed at setup: spine and OTN-link choices hash on the connection id, so
// packets of one flow never reorder in the fabric.
struct Flow {
    ConnId id = 0;
    NodeId src = 0;
    NodeId dst = 0;
    FlowClass flow_class = FlowClass::kIntraDc;
    std::vector<Port*> fwd;
    std::vector<Port*> rev;
    int src_otn_fwd_hop = -1;  // hop at which the source OTN forwards onward
    int dst_otn_fwd_hop = -1;
    int src_otn_rev_hop = -1;  // source-OTN egress toward the sender
    int dst_otn_rev_hop = -1;  // dest-OTN egress onto the long haul
    SimTime base_rtt = 0;
    SenderQp snd;
    ReceiverQp rcv;
};

// One scenario run: owns the engine, the fabric, the hosts, both OTN edges,
// the workload driver and all collected metrics. Never shared across runs.
class Simulation : public EventTarget {
  public:
    explicit Simulation(const ScenarioConfig& cfg);
    ~Simulation();

    // Executes the configured workload to completion (or max_duration) and
    // returns the per-run metrics row. Runs end-of-run safety audits.
    MetricsRecord run();

    EventEngine& engine() { return engine_; }
    const ScenarioConfig& config() const { return cfg_; }
    MetricsCollector& metrics() { return metrics_; }
    const TopologyLayout& layout() const { return layout_; }

    Node* node(NodeId id) { return nodes_[id].get(); }
    ServerNode* server(std::uint32_t dc, std::uint32_t idx);
    OtnEdgeNode* otn_edge(std::uint32_t dc);

    ConnId open_connection(NodeId src, NodeId dst, FlowClass cls);
    Flow& flow(ConnId id) { return *flows_[id]; }
    std::uint32_t flow_count() const { return static_cast<std::uint32_t>(flows_.size()); }
    std::uint32_t submit_message(ConnId conn, std::uint64_t size, bool barrier_counted = false);

    // Packet plumbing shared by every node.
    void forward_packet(RocePacket pkt);
    void packet_on_wire(const RocePacket& pkt, NodeId to, SimTime arrive_at);
    void packet_on_wire_from(const RocePacket& pkt, NodeId from, NodeId to, SimTime arrive_at);
    void packet_landed() { --in_flight_packets_; }
    void packet_consumed() { metrics_.on_wire_consumed(); }
    void note_inter_delivery() { last_inter_delivery_at_ = engine_.now(); }
    std::uint64_t in_flight_packets() const { return in_flight_packets_; }

    void on_event(const Event& ev) override;
    void on_message_completed(Flow& f, Message& msg);

    void record_budget_install(SimTime at, std::uint64_t epoch, double rate_bps);
    const std::vector<std::tuple<SimTime, std::uint64_t, double>>& budget_trace() const {
        return budget_trace_;
    }
    const std::vector<std::pair<SimTime, std::uint64_t>>& buffer_trace() const {
        return buffer_trace_;
    }

    // End-of-run safety audits (throw SimulationError on violation).
    void audit_conservation();
    void audit_ledgers();

    double pause_time_ratio();
    std::uint64_t queued_packets() const;

    bool workload_complete() const { return workload_done_; }
    SimTime active_window_ns() const { return metrics_.active_ns(); }

    Rng& jitter_rng() { return jitter_rng_; }

    SimTime intra_base_rtt() const { return intra_base_rtt_; }

  private:
    void build_topology();
    void connect(NodeId a, NodeId b, double rate_bps, SimTime prop, bool pfc, bool ecn,
                 std::uint64_t capacity);
    void start_workload();
    void issue_iteration(std::uint32_t iter);
    void schedule_next_background();
    void apply_drain_rate(double gbps_total);
    void write_traces();
    MetricsRecord collect_record();

    ScenarioConfig cfg_;
    TopologyLayout layout_;
    EventEngine engine_;
    MetricsCollector metrics_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::vector<std::unique_ptr<Flow>> flows_;
    std::unordered_map<std::uint64_t, ConnId> pair_conn_;  // (src,dst) -> conn

    WorkloadPlan plan_;
    std::unique_ptr<BackgroundGenerator> background_;
    std::uint32_t current_iteration_ = 0;
    std::uint32_t iteration_outstanding_ = 0;
    SimTime iteration_issue_at_ = 0;
    SimTime last_inter_delivery_at_ = 0;
    bool workload_done_ = false;
    bool workload_empty_ = false;

    std::uint64_t in_flight_packets_ = 0;
    std::uint64_t completed_messages_ = 0;
    std::uint64_t submitted_messages_ = 0;
    std::uint32_t next_msg_id_ = 0;
    std::uint64_t watchdog_last_completed_ = 0;
    std::uint64_t watchdog_last_delivered_ = 0;

    Rng jitter_rng_;
    SimTime intra_base_rtt_ = 0;

    std::vector<std::tuple<SimTime, std::uint64_t, double>> budget_trace_;
    std::vector<std::pair<SimTime, std::uint64_t>> buffer_trace_;

    friend class ServerNode;
    friend class OtnEdgeNode;
};

// End host: per-connection sender and receiver queue pairs, DCQCN pacing,
// go-back-N reliability.
class ServerNode : public Node {
  public:
    ServerNode(Simulation* sim, NodeId id, const TransportConfig& cfg)
        : Node(sim, id, NodeKind::kServer), cfg_(cfg) {}

    void on_packet(const RocePacket& pkt) override;
    void on_timer(const Event& ev) override;

    void attach_sender(Flow& f);
    void submit(Flow& f, Message msg);
    void kick_sender(Flow& f);

    const TransportConfig& transport_config() const { return cfg_; }

  private:
    void sender_try_emit(Flow& f);
    void schedule_pacer(Flow& f, SimTime at);
    void sender_on_ack(Flow& f, const RocePacket& pkt);
    void sender_on_cnp(Flow& f);
    void receiver_on_data(Flow& f, const RocePacket& pkt);
    void emit_reverse(Flow& f, PacketKind kind, std::uint64_t psn,
                      ControlOp op = ControlOp::kNone);
    void start_cc_timers(Flow& f);
    void arm_rto(Flow& f);
    void complete_messages_below(Flow& f, std::uint64_t psn);

    TransportConfig cfg_;
};

}  // namespace matchrdma
