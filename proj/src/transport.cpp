#include "matchrdma/transport.hpp"

#include <algorithm>
#include <cmath>

#include "matchrdma/simulation.hpp"

namespace matchrdma {

std::uint64_t segment_count(std::uint64_t msg_size, std::uint32_t mtu_payload) {
    if (msg_size == 0) throw SimulationError("zero-size message");
    return (msg_size + mtu_payload - 1) / mtu_payload;
}

std::uint32_t segment_payload(std::uint64_t msg_size, std::uint32_t mtu_payload,
                              std::uint64_t index) {
    const std::uint64_t n = segment_count(msg_size, mtu_payload);
    if (index + 1 < n) return mtu_payload;
    const std::uint64_t rem = msg_size - (n - 1) * mtu_payload;
    return static_cast<std::uint32_t>(rem);
}

const Message* SenderQp::message_of(std::uint64_t psn) const {
    // Messages hold contiguous ascending psn ranges; binary search.
    auto it = std::upper_bound(messages.begin(), messages.end(), psn,
                               [](std::uint64_t v, const Message& m) { return v < m.first_psn; });
    if (it == messages.begin()) return nullptr;
    const Message& m = *std::prev(it);
    return (psn <= m.last_psn) ? &m : nullptr;
}

std::uint32_t SenderQp::payload_of(std::uint64_t psn, std::uint32_t mtu_payload) const {
    const Message* m = message_of(psn);
    if (m == nullptr) throw SimulationError("psn outside any message");
    return segment_payload(m->size, mtu_payload, psn - m->first_psn);
}

std::uint64_t SenderQp::bytes_between(std::uint64_t from_psn, std::uint64_t to_psn,
                                      std::uint32_t mtu_payload) const {
    std::uint64_t total = 0;
    std::uint64_t psn = from_psn;
    while (psn < to_psn) {
        const Message* m = message_of(psn);
        if (m == nullptr) throw SimulationError("psn outside any message");
        const std::uint64_t hi = std::min(to_psn - 1, m->last_psn);
        // full segments in [psn, hi], adjusting for a possibly short tail
        for (std::uint64_t q = psn; q <= hi; ++q) {
            total += kRoceHeaderBytes + segment_payload(m->size, mtu_payload, q - m->first_psn);
        }
        psn = hi + 1;
    }
    return total;
}

void ServerNode::attach_sender(Flow& f) {
    SenderQp& qp = f.snd;
    qp.conn = f.id;
    qp.flow_class = f.flow_class;
    qp.window_cap = cfg_.window_cap;
    double ratio = 1.0;
    if (sim_->config().scheme == SchemeId::kThemisLike && sim_->intra_base_rtt() > 0) {
        ratio = std::min(static_cast<double>(sim_->config().transport.themis_ratio_cap),
                         std::max(1.0, static_cast<double>(f.base_rtt) /
                                           static_cast<double>(sim_->intra_base_rtt())));
    }
    qp.cc.init(f.fwd.front()->rate_bps(), cfg_.dcqcn, ratio);
    qp.srtt = f.base_rtt;
}

void ServerNode::submit(Flow& f, Message msg) {
    SenderQp& qp = f.snd;
    const std::uint64_t segments = segment_count(msg.size, cfg_.mtu_payload);
    msg.first_psn = qp.end_psn;
    msg.last_psn = qp.end_psn + segments - 1;
    qp.end_psn += segments;
    qp.messages.push_back(msg);
    kick_sender(f);
}

void ServerNode::kick_sender(Flow& f) {
    SenderQp& qp = f.snd;
    if (qp.pacer_scheduled || !qp.has_unsent()) return;
    const SimTime now = sim_->engine().now();
    const SimTime at = std::max<SimTime>(now, static_cast<SimTime>(std::ceil(qp.pace_next_ns)));
    schedule_pacer(f, at);
}

void ServerNode::schedule_pacer(Flow& f, SimTime at) {
    f.snd.pacer_scheduled = true;
    sim_->engine().schedule(at, this, EventKind::kPacerTimer, f.id);
}

void ServerNode::sender_try_emit(Flow& f) {
    SenderQp& qp = f.snd;
    qp.pacer_scheduled = false;
    if (!qp.has_unsent()) return;

    const SimTime now = sim_->engine().now();
    const std::uint32_t payload = qp.payload_of(qp.snd_nxt, cfg_.mtu_payload);
    const std::uint64_t wire_size = kRoceHeaderBytes + payload;

    if (qp.inflight_bytes + wire_size > qp.window_cap) {
        return;  // closed window: an ACK will re-kick
    }
    if (static_cast<double>(now) + 1e-9 < qp.pace_next_ns) {
        schedule_pacer(f, static_cast<SimTime>(std::ceil(qp.pace_next_ns)));
        return;
    }
    Port* nic = f.fwd.front();
    if (nic->data_occupancy() + wire_size > nic->data_capacity) {
        // NIC back-pressure: the egress queue is full (PFC pushed congestion
        // all the way to the host); retry after roughly one wire time
        schedule_pacer(f, now + static_cast<SimTime>(
                               serialization_ns(wire_size, nic->rate_bps())) + 1);
        return;
    }

    const Message* m = qp.message_of(qp.snd_nxt);
    RocePacket pkt;
    pkt.conn_id = f.id;
    pkt.psn = static_cast<std::uint32_t>(qp.snd_nxt);
    pkt.kind = PacketKind::kData;
    pkt.ecn = EcnBits::kEct;
    pkt.forward = 1;
    pkt.hop = 0;
    pkt.payload = payload;
    pkt.msg_id = m->msg_id;
    pkt.msg_last = (qp.snd_nxt == m->last_psn) ? 1 : 0;
    pkt.src = f.src;
    pkt.dst = f.dst;

    if (!qp.sample_pending) {
        qp.sample_pending = true;
        qp.sample_psn = qp.snd_nxt;
        qp.sample_sent_at = now;
    }
    ++qp.snd_nxt;
    if (qp.snd_nxt > qp.max_sent_psn) qp.max_sent_psn = qp.snd_nxt;
    qp.inflight_bytes += wire_size;
    qp.cc.bytes_since_increase += wire_size;
    if (qp.cc.ever_cnp && qp.cc.bytes_since_increase >= cfg_.dcqcn.byte_counter) {
        qp.cc.bytes_since_increase = 0;
        qp.cc.on_increase_event(cfg_.dcqcn.fast_recovery_events);
    }

    const double gap_ns = static_cast<double>(wire_size) * 8e9 / qp.cc.current_rate_bps;
    qp.pace_next_ns = std::max(qp.pace_next_ns, static_cast<double>(now)) + gap_ns;

    sim_->metrics().on_wire_enqueue();
    sim_->forward_packet(pkt);
    arm_rto(f);

    if (qp.has_unsent()) {
        const std::uint64_t next_size = kRoceHeaderBytes + qp.payload_of(qp.snd_nxt, cfg_.mtu_payload);
        if (qp.inflight_bytes + next_size <= qp.window_cap) {
            schedule_pacer(f, static_cast<SimTime>(std::ceil(qp.pace_next_ns)));
        }
    }
}

void ServerNode::arm_rto(Flow& f) {
    SenderQp& qp = f.snd;
    const SimTime base = std::max(cfg_.min_rto,
                                  static_cast<SimTime>(cfg_.rto_multiplier *
                                                       static_cast<double>(qp.srtt)));
    qp.rto_deadline = sim_->engine().now() + base;
    if (!qp.rto_armed && qp.snd_una < qp.snd_nxt) {
        qp.rto_armed = true;
        sim_->engine().schedule(qp.rto_deadline, this, EventKind::kRtoTimer, f.id);
    }
}

void ServerNode::start_cc_timers(Flow& f) {
    SenderQp& qp = f.snd;
    if (qp.cc_timers_running) return;
    qp.cc_timers_running = true;
    ++qp.timer_generation;
    const SimTime now = sim_->engine().now();
    sim_->engine().schedule(now + cfg_.dcqcn.alpha_timer, this, EventKind::kAlphaTimer, f.id,
                            qp.timer_generation);
    sim_->engine().schedule(now + cfg_.dcqcn.increase_timer, this,
                            EventKind::kRateIncreaseTimer, f.id, qp.timer_generation);
}

void ServerNode::sender_on_cnp(Flow& f) {
    SenderQp& qp = f.snd;
    qp.cc.on_cnp();
    if (qp.cc_timers_running) {
        // restart the increase countdown from the decrease
        ++qp.timer_generation;
        const SimTime now = sim_->engine().now();
        sim_->engine().schedule(now + cfg_.dcqcn.alpha_timer, this, EventKind::kAlphaTimer, f.id,
                                qp.timer_generation);
        sim_->engine().schedule(now + cfg_.dcqcn.increase_timer, this,
                                EventKind::kRateIncreaseTimer, f.id, qp.timer_generation);
    } else {
        start_cc_timers(f);
    }
}

void ServerNode::complete_messages_below(Flow& f, std::uint64_t psn) {
    SenderQp& qp = f.snd;
    const SimTime now = sim_->engine().now();
    while (qp.first_active_msg < qp.messages.size()) {
        Message& m = qp.messages[qp.first_active_msg];
        if (m.last_psn >= psn) break;
        if (!m.completed()) {
            m.completed_at = now;
            sim_->metrics().on_message_complete(m.flow_class, now - m.created_at);
            sim_->on_message_completed(f, m);
        }
        ++qp.first_active_msg;
    }
}

void ServerNode::sender_on_ack(Flow& f, const RocePacket& pkt) {
    SenderQp& qp = f.snd;
    const std::uint64_t p = pkt.psn;
    // completion settles via relay records only where a relay actually owns
    // the path: inter-DC flows under the pseudo-ACK schemes
    const bool relay_scheme = (sim_->config().scheme == SchemeId::kMatchRdma ||
                               sim_->config().scheme == SchemeId::kPseudoAck) &&
                              f.src_otn_fwd_hop >= 0;

    switch (pkt.kind) {
        case PacketKind::kAck:
        case PacketKind::kPseudoAck: {
            if (p > qp.max_sent_psn) {
                throw SimulationError("ACK beyond any sent psn (protocol violation)");
            }
            if (p > qp.snd_una) {
                qp.snd_una = p;
                // after a timeout rewind a cumulative ACK may cover data sent
                // before the rewind: fast-forward past the delivered prefix
                if (p > qp.snd_nxt) qp.snd_nxt = p;
                qp.inflight_bytes = qp.bytes_between(qp.snd_una, qp.snd_nxt, cfg_.mtu_payload);
                qp.last_progress_at = sim_->engine().now();
                if (qp.sample_pending && p > qp.sample_psn) {
                    const SimTime rtt = sim_->engine().now() - qp.sample_sent_at;
                    qp.srtt = (7 * qp.srtt + rtt) / 8;
                    qp.sample_pending = false;
                }
                arm_rto(f);
                kick_sender(f);
            }
            // A fabricated ACK advances the window but never settles
            // completion; real delivery is reported separately.
            if (pkt.kind == PacketKind::kAck && !relay_scheme) complete_messages_below(f, p);
            break;
        }
        case PacketKind::kNack: {
            if (p > qp.max_sent_psn) {
                throw SimulationError("NACK beyond any sent psn (protocol violation)");
            }
            if (p < qp.snd_una) break;  // stale: cumulative ACKs already passed it
            if (p > qp.snd_una) {
                qp.snd_una = p;
                if (!relay_scheme) complete_messages_below(f, p);
            }
            qp.snd_nxt = p;  // go-back-N
            qp.inflight_bytes = 0;
            qp.sample_pending = false;
            qp.pace_next_ns = std::max(qp.pace_next_ns, static_cast<double>(sim_->engine().now()));
            arm_rto(f);
            kick_sender(f);
            break;
        }
        case PacketKind::kControl:
            if (pkt.control_op == ControlOp::kCompletionRecord) complete_messages_below(f, p);
            break;
        default:
            break;
    }
}

void ServerNode::receiver_on_data(Flow& f, const RocePacket& pkt) {
    ReceiverQp& rq = f.rcv;
    const SimTime now = sim_->engine().now();

    if (pkt.ecn == EcnBits::kCe && now - rq.last_cnp_at >= cfg_.cnp_min_interval) {
        rq.last_cnp_at = now;
        emit_reverse(f, PacketKind::kCnp, 0);
    }

    if (pkt.psn == rq.rcv_nxt) {
        rq.rcv_nxt += 1;
        rq.delivered_payload += pkt.payload;
        sim_->metrics().on_delivered_payload(f.flow_class, pkt.payload);
        if (f.flow_class == FlowClass::kInterDc) sim_->note_inter_delivery();
        ++rq.since_ack;
        if (rq.since_ack >= cfg_.ack_coalesce || pkt.msg_last) {
            rq.since_ack = 0;
            emit_reverse(f, PacketKind::kAck, rq.rcv_nxt);
        }
    } else if (pkt.psn > rq.rcv_nxt) {
        // gap: payload discarded, cumulative NACK names the expected psn
        if (rq.last_nack_psn != rq.rcv_nxt ||
            now - rq.last_nack_at >= cfg_.nack_repeat_interval) {
            rq.last_nack_psn = rq.rcv_nxt;
            rq.last_nack_at = now;
            emit_reverse(f, PacketKind::kNack, rq.rcv_nxt);
        }
    } else {
        emit_reverse(f, PacketKind::kAck, rq.rcv_nxt);  // duplicate: re-ACK
    }
}

void ServerNode::emit_reverse(Flow& f, PacketKind kind, std::uint64_t psn, ControlOp op) {
    RocePacket pkt;
    pkt.conn_id = f.id;
    pkt.psn = static_cast<std::uint32_t>(psn);
    pkt.kind = kind;
    pkt.control_op = op;
    pkt.forward = 0;
    pkt.hop = 0;
    pkt.src = f.src;
    pkt.dst = f.dst;
    sim_->metrics().on_wire_enqueue();
    sim_->forward_packet(pkt);
}

void ServerNode::on_packet(const RocePacket& pkt) {
    Flow& f = sim_->flow(pkt.conn_id);
    sim_->packet_consumed();
    if (pkt.forward) {
        if (pkt.kind == PacketKind::kData) {
            receiver_on_data(f, pkt);
        }
        // connection-setup records need no receiver action in-model
    } else {
        if (pkt.kind == PacketKind::kCnp) {
            sender_on_cnp(f);
        } else {
            sender_on_ack(f, pkt);
        }
    }
}

void ServerNode::on_timer(const Event& ev) {
    Flow& f = sim_->flow(static_cast<ConnId>(ev.a));
    SenderQp& qp = f.snd;
    switch (ev.kind) {
        case EventKind::kPacerTimer:
            sender_try_emit(f);
            return;
        case EventKind::kAlphaTimer:
            if (ev.b != qp.timer_generation) return;
            qp.cc.on_alpha_timer();
            if (qp.cc.alpha > 1e-9 || qp.cc.current_rate_bps < qp.cc.line_rate_bps) {
                sim_->engine().schedule(ev.at + cfg_.dcqcn.alpha_timer, this,
                                        EventKind::kAlphaTimer, f.id, qp.timer_generation);
            } else {
                qp.cc_timers_running = false;
            }
            return;
        case EventKind::kRateIncreaseTimer: {
            if (ev.b != qp.timer_generation) return;
            qp.cc.on_increase_event(cfg_.dcqcn.fast_recovery_events);
            if (qp.cc.current_rate_bps < qp.cc.line_rate_bps || qp.cc.alpha > 1e-9) {
                sim_->engine().schedule(ev.at + cfg_.dcqcn.increase_timer, this,
                                        EventKind::kRateIncreaseTimer, f.id,
                                        qp.timer_generation);
            }
            kick_sender(f);
            return;
        }
        case EventKind::kRtoTimer: {
            qp.rto_armed = false;
            if (qp.snd_una >= qp.snd_nxt) return;
            if (ev.at < qp.rto_deadline) {
                qp.rto_armed = true;
                sim_->engine().schedule(qp.rto_deadline, this, EventKind::kRtoTimer, f.id);
                return;
            }
            qp.snd_nxt = qp.snd_una;  // retransmit the whole window
            qp.inflight_bytes = 0;
            qp.sample_pending = false;
            qp.srtt = std::min<SimTime>(qp.srtt * 2, 100 * kMillisecond);
            arm_rto(f);
            kick_sender(f);
            return;
        }
        default:
            return;
    }
}

}  // namespace matchrdma
