#include "matchrdma/port.hpp"

#include "matchrdma/node.hpp"
#include "matchrdma/simulation.hpp"

namespace matchrdma {

Port::Port(Node* owner, std::uint32_t index, NodeId peer, double rate_bps, SimTime prop_ns)
    : owner_(owner), index_(index), peer_(peer), rate_bps_(rate_bps), prop_ns_(prop_ns) {}

bool Port::ecn_decide() {
    if (!ecn.enabled) return false;
    const std::uint64_t occ = data_occupancy_;
    if (occ < ecn.kmin) return false;
    if (occ >= ecn.kmax) return true;
    const double p =
        ecn.pmax * static_cast<double>(occ - ecn.kmin) / static_cast<double>(ecn.kmax - ecn.kmin);
    return rng.next_double() < p;
}

EnqueueResult Port::enqueue(const RocePacket& pkt, SimTime now) {
    if (pkt.header_only()) {
        ctrl_q_.push_back(pkt);
        maybe_start_tx(now);
        return EnqueueResult::kAccepted;
    }

    const std::uint64_t sz = pkt.size();
    if (pool != nullptr) {
        if (!pool->try_charge(sz, now)) {
            ++drops_;
            return EnqueueResult::kDropped;
        }
    } else if (data_occupancy_ + sz > data_capacity) {
        ++drops_;
        return EnqueueResult::kDropped;
    }

    RocePacket queued = pkt;
    if (queued.ecn == EcnBits::kEct && ecn_decide()) queued.ecn = EcnBits::kCe;
    data_q_.push_back(queued);
    data_occupancy_ += sz;
    if (pfc.enabled && queued.ingress_node != 0xffff) {
        Contributor& c = contributor(queued.ingress_node);
        c.bytes += sz;
        // while held above xon, newly arriving contributors get paused too
        if (xoff_sent_ && !c.paused_by_me) pause_contributor(c, true);
    }
    data_occupancy_changed(now);
    maybe_start_tx(now);
    return EnqueueResult::kAccepted;
}

Port::Contributor& Port::contributor(NodeId node) {
    for (auto& c : contributors_) {
        if (c.node == node) return c;
    }
    contributors_.push_back({node, 0, false});
    return contributors_.back();
}

void Port::pause_contributor(Contributor& c, bool pause) {
    c.paused_by_me = pause;
    Node* neighbor = owner_->sim()->node(c.node);
    Port* their_port = neighbor->port_to(owner_->id());
    if (their_port == nullptr) return;
    EventEngine& engine = owner_->sim()->engine();
    engine.schedule(engine.now() + their_port->prop_ns(), neighbor,
                    pause ? EventKind::kPfcPause : EventKind::kPfcResume,
                    their_port->index());
}

void Port::maybe_start_tx(SimTime now) {
    if (busy_) return;
    const bool ctrl = !ctrl_q_.empty();
    const bool data = !data_q_.empty() && pause_refs_ == 0;
    if (!ctrl && !data) return;

    tx_from_data_ = !ctrl;  // strict priority: control first
    const RocePacket& pkt = ctrl ? ctrl_q_.front() : data_q_.front();
    busy_ = true;
    const std::int64_t total_ps = carry_ps_ + serialization_ps(pkt.size(), rate_bps_);
    const SimTime ser_ns = total_ps / 1000;
    carry_ps_ = total_ps % 1000;
    owner_->sim()->engine().schedule(now + ser_ns, owner_, EventKind::kTxComplete, index_);
}

void Port::on_tx_complete(SimTime now) {
    busy_ = false;
    RocePacket pkt;
    if (tx_from_data_) {
        pkt = data_q_.front();
        data_q_.pop_front();
        const std::uint64_t sz = pkt.size();
        data_occupancy_ -= sz;
        if (pool != nullptr) pool->release(sz, now);
        if (pfc.enabled && pkt.ingress_node != 0xffff) {
            contributor(pkt.ingress_node).bytes -= sz;
        }
        data_occupancy_changed(now);
    } else {
        pkt = ctrl_q_.front();
        ctrl_q_.pop_front();
    }
    owner_->on_port_tx(pkt, *this);
    owner_->sim()->packet_on_wire_from(pkt, owner_->id(), peer_, now + prop_ns_);
    maybe_start_tx(now);
}

void Port::data_occupancy_changed(SimTime now) {
    (void)now;
    if (!pfc.enabled) return;
    if (!xoff_sent_ && data_occupancy_ > pfc.xoff) {
        // pause exactly the neighbors with bytes parked in this queue
        xoff_sent_ = true;
        for (auto& c : contributors_) {
            if (c.bytes > 0 && !c.paused_by_me) pause_contributor(c, true);
        }
    } else if (xoff_sent_ && data_occupancy_ < pfc.xon) {
        xoff_sent_ = false;
        for (auto& c : contributors_) {
            if (c.paused_by_me) pause_contributor(c, false);
        }
    }
}

void Port::pfc_pause(SimTime now) {
    ++pause_rx_;
    if (pause_refs_ == 0) paused_since_ = now;
    ++pause_refs_;
}

void Port::pfc_resume(SimTime now) {
    ++resume_rx_;
    --pause_refs_;
    if (pause_refs_ < 0) throw SimulationError("PFC resume without matching pause");
    if (pause_refs_ == 0) {
        paused_accum_ += now - paused_since_;
        maybe_start_tx(now);
    }
}

SimTime Port::paused_accum(SimTime now) const {
    return paused_accum_ + (pause_refs_ > 0 ? now - paused_since_ : 0);
}

}  // namespace matchrdma
