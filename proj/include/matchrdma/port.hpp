#pragma once

#include <cstdint>
#include <deque>

#include "matchrdma/event_engine.hpp"
#include "matchrdma/packet.hpp"
#include "matchrdma/rng.hpp"
#include "matchrdma/sim_time.hpp"

namespace matchrdma {

class Node;
class Simulation;

struct EcnConfig {
    bool enabled = false;
    std::uint64_t kmin = 100 * 1024;
    std::uint64_t kmax = 400 * 1024;
    double pmax = 1.0;
};

struct PfcConfig {
    bool enabled = false;
    std::uint64_t xoff = 512 * 1024;
    std::uint64_t xon = 256 * 1024;
};

// Shared runtime buffer charged by every DC-facing data queue of an OTN
// edge; models the destination-OTN ingress buffer of the reservoir picture.
class SharedBufferPool {
  public:
    explicit SharedBufferPool(std::uint64_t capacity) : capacity_(capacity) {}

    bool try_charge(std::uint64_t bytes, SimTime now) {
        if (occupancy_ + bytes > capacity_) return false;
        integrate(now);
        occupancy_ += bytes;
        if (occupancy_ > peak_) peak_ = occupancy_;
        return true;
    }
    void release(std::uint64_t bytes, SimTime now) {
        integrate(now);
        occupancy_ -= bytes;
    }

    std::uint64_t occupancy() const { return occupancy_; }
    std::uint64_t peak() const { return peak_; }
    std::uint64_t capacity() const { return capacity_; }
    void set_capacity(std::uint64_t c) { capacity_ = c; }

    // Time-weighted mean occupancy over [0, now].
    double mean_bytes(SimTime now) {
        integrate(now);
        return now > 0 ? byte_ns_ / static_cast<double>(now) : 0.0;
    }

  private:
    void integrate(SimTime now) {
        byte_ns_ += static_cast<double>(occupancy_) * static_cast<double>(now - last_change_);
        last_change_ = now;
    }
    std::uint64_t capacity_;
    std::uint64_t occupancy_ = 0;
    std::uint64_t peak_ = 0;
    double byte_ns_ = 0.0;
    SimTime last_change_ = 0;
};

enum class EnqueueResult : std::uint8_t { kAccepted, kDropped };

// One egress port: a strict-priority pair of FIFO queues (header-only
// control traffic bypasses data), ECN marking and PFC watermarks on the
// data queue, and a transmitter with picosecond-exact serialization carry.
// PFC pause applies to the data class only.
class Port {
  public:
    Port(Node* owner, std::uint32_t index, NodeId peer, double rate_bps, SimTime prop_ns);

    EnqueueResult enqueue(const RocePacket& pkt, SimTime now);
    void on_tx_complete(SimTime now);

    // PFC pause state received from downstream queues; refcounted because
    // several downstream queues may pause the same upstream port.
    void pfc_pause(SimTime now);
    void pfc_resume(SimTime now);
    bool paused() const { return pause_refs_ > 0; }
    SimTime paused_accum(SimTime now) const;
    std::uint64_t pause_frames_rx() const { return pause_rx_; }
    std::uint64_t resume_frames_rx() const { return resume_rx_; }

    void set_rate(double bps) { rate_bps_ = bps; }
    double rate_bps() const { return rate_bps_; }
    SimTime prop_ns() const { return prop_ns_; }
    NodeId peer() const { return peer_; }
    std::uint32_t index() const { return index_; }
    Node* owner() const { return owner_; }

    std::uint64_t data_occupancy() const { return data_occupancy_; }
    std::uint64_t drops() const { return drops_; }
    bool pfc_enabled() const { return pfc.enabled; }
    std::uint64_t queued_packets() const { return ctrl_q_.size() + data_q_.size(); }

    // Linear ECN marking decision against the current data occupancy.
    bool ecn_decide();

    EcnConfig ecn;
    PfcConfig pfc;
    SharedBufferPool* pool = nullptr;           // optional shared buffer
    std::uint64_t data_capacity = 1024 * 1024;  // used when pool == nullptr
    Rng rng;

    void maybe_start_tx(SimTime now);

  private:
    void data_occupancy_changed(SimTime now);

    Node* owner_;
    std::uint32_t index_;
    NodeId peer_;
    double rate_bps_;
    SimTime prop_ns_;

    std::deque<RocePacket> ctrl_q_;
    std::deque<RocePacket> data_q_;
    std::uint64_t data_occupancy_ = 0;
    bool busy_ = false;
    bool tx_from_data_ = false;
    std::int64_t carry_ps_ = 0;  // sub-ns serialization remainder

    int pause_refs_ = 0;
    SimTime paused_since_ = 0;
    SimTime paused_accum_ = 0;
    std::uint64_t pause_rx_ = 0;
    std::uint64_t resume_rx_ = 0;

    bool xoff_sent_ = false;  // hysteresis edge state of this data queue
    // bytes queued here per contributing upstream neighbor, and whether that
    // neighbor is currently paused by this queue
    struct Contributor {
        NodeId node;
        std::uint64_t bytes = 0;
        bool paused_by_me = false;
    };
    std::vector<Contributor> contributors_;
    std::uint64_t drops_ = 0;

    Contributor& contributor(NodeId node);
    void pause_contributor(Contributor& c, bool pause);
};

}  // namespace matchrdma
