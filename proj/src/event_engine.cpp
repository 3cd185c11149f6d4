#include "matchrdma/event_engine.hpp"

namespace matchrdma {

const char* to_string(PacketKind kind) {
    switch (kind) {
        case PacketKind::kData: return "DATA";
        case PacketKind::kAck: return "ACK";
        case PacketKind::kNack: return "NACK";
        case PacketKind::kCnp: return "CNP";
        case PacketKind::kPseudoAck: return "PSEUDO_ACK";
        case PacketKind::kControl: return "CONTROL";
    }
    return "?";
}

SimTime EventEngine::run_until(SimTime end) {
    if (end < now_) throw SimulationError("run_until into the past");
    while (!queue_.empty() && queue_.top().at <= end) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.at;
        ++dispatched_;
        if (log_enabled_) log_.emplace_back(ev.at, ev.seq);
        ev.target->on_event(ev);
    }
    now_ = end;
    return now_;
}

SimTime EventEngine::run_until_stopped(SimTime end) {
    if (end < now_) throw SimulationError("run_until into the past");
    while (!stop_requested_ && !queue_.empty() && queue_.top().at <= end) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.at;
        ++dispatched_;
        if (log_enabled_) log_.emplace_back(ev.at, ev.seq);
        ev.target->on_event(ev);
    }
    if (!stop_requested_) now_ = end;
    return now_;
}

}  // namespace matchrdma
