#pragma once

#include <cstdint>
#include <queue>
#include <stdexcept>
#include <vector>

#include "matchrdma/packet.hpp"
#include "matchrdma/sim_time.hpp"

namespace matchrdma {

class SimulationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class EventKind : std::uint32_t {
    kPacketArrive,
    kTxComplete,
    kPacerTimer,
    kAlphaTimer,
    kRateIncreaseTimer,
    kRtoTimer,
    kAckCoalesceTimer,
    kSlotBoundary,
    kStagingRelease,
    kRelayRtoTimer,
    kPfcPause,
    kPfcResume,
    kControlDelivery,
    kDelayProbe,
    kRateChange,
    kComputePhaseDone,
    kBackgroundArrival,
    kWatchdog,
    kTraceSample,
    kBudgetRefresh,
};

struct Event;

class EventTarget {
  public:
    virtual ~EventTarget() = default;
    virtual void on_event(const Event& ev) = 0;
};

struct Event {
    SimTime at = 0;
    std::uint64_t seq = 0;  // insertion order; ties on `at` dispatch FIFO
    EventTarget* target = nullptr;
    EventKind kind = EventKind::kPacketArrive;
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    RocePacket pkt;
};

// Deterministic discrete-event core: one global clock, one queue, stable
// FIFO tie-breaking. Owned by exactly one simulation run.
class EventEngine {
  public:
    SimTime now() const { return now_; }

    void schedule(SimTime at, EventTarget* target, EventKind kind, std::uint64_t a = 0,
                  std::uint64_t b = 0) {
        Event ev;
        ev.at = at;
        ev.target = target;
        ev.kind = kind;
        ev.a = a;
        ev.b = b;
        push(ev);
    }

    void schedule_packet(SimTime at, EventTarget* target, EventKind kind, const RocePacket& pkt,
                         std::uint64_t a = 0, std::uint64_t b = 0) {
        Event ev;
        ev.at = at;
        ev.target = target;
        ev.kind = kind;
        ev.a = a;
        ev.b = b;
        ev.pkt = pkt;
        push(ev);
    }

    // Dispatches every event with fire_at <= end. The clock never exceeds
    // `end`, and never moves backwards.
    SimTime run_until(SimTime end);

    // Drains the queue until `end`, a stop request, or queue exhaustion.
    SimTime run_until_stopped(SimTime end);

    void request_stop() { stop_requested_ = true; }
    bool stop_requested() const { return stop_requested_; }

    std::uint64_t scheduled_count() const { return scheduled_; }
    std::uint64_t dispatched_count() const { return dispatched_; }
    std::uint64_t pending_count() const { return queue_.size(); }

    // When enabled, records (fire_at, seq) of every dispatch; two runs of the
    // same scenario must produce identical logs.
    void enable_dispatch_log(bool on) { log_enabled_ = on; }
    const std::vector<std::pair<SimTime, std::uint64_t>>& dispatch_log() const { return log_; }

  private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.seq > b.seq;
        }
    };

    void push(Event& ev) {
        if (ev.at < now_) {
            throw SimulationError("event scheduled into the past (causality violation)");
        }
        ev.seq = next_seq_++;
        ++scheduled_;
        queue_.push(ev);
    }

    SimTime now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t scheduled_ = 0;
    std::uint64_t dispatched_ = 0;
    bool stop_requested_ = false;
    bool log_enabled_ = false;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::vector<std::pair<SimTime, std::uint64_t>> log_;
};

}  // namespace matchrdma
