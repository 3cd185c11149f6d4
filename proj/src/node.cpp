#include "matchrdma/node.hpp"

#include "matchrdma/simulation.hpp"

namespace matchrdma {

Port* Node::add_port(NodeId peer, double rate_bps, SimTime prop_ns) {
    ports_.push_back(std::make_unique<Port>(this, static_cast<std::uint32_t>(ports_.size()),
                                            peer, rate_bps, prop_ns));
    return ports_.back().get();
}

Port* Node::port_to(NodeId peer) {
    for (auto& p : ports_) {
        if (p->peer() == peer) return p.get();
    }
    return nullptr;
}

void Node::on_event(const Event& ev) {
    switch (ev.kind) {
        case EventKind::kPacketArrive:
            sim_->packet_landed();
            on_packet(ev.pkt);
            return;
        case EventKind::kTxComplete:
            ports_[ev.a]->on_tx_complete(ev.at);
            return;
        case EventKind::kPfcPause:
            ports_[ev.a]->pfc_pause(ev.at);
            return;
        case EventKind::kPfcResume:
            ports_[ev.a]->pfc_resume(ev.at);
            return;
        default:
            on_timer(ev);
            return;
    }
}

void Node::emit_pfc_upstream(bool pause) {
    auto& engine = sim_->engine();
    const SimTime now = engine.now();
    for (const auto& up : upstreams) {
        if (!up.pausable) continue;
        engine.schedule(now + up.prop_ns, up.node,
                        pause ? EventKind::kPfcPause : EventKind::kPfcResume, up.port);
    }
}

void SwitchNode::on_packet(const RocePacket& pkt) {
    sim_->forward_packet(pkt);
}

}  // namespace matchrdma
