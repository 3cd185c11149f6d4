#include "matchrdma/otn_edge.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstdlib>

#include "matchrdma/simulation.hpp"

namespace matchrdma {

namespace {
constexpr std::uint64_t kCtrlDelayProbe = 1;
constexpr std::uint64_t kCtrlDelayEcho = 2;
constexpr std::uint64_t kCtrlBudget = 3;
constexpr std::uint64_t kCtrlSummary = 4;
constexpr std::uint64_t kControlMsgBytes = 64;
}  // namespace

OtnEdgeNode::OtnEdgeNode(Simulation* sim, NodeId id, const SchemeProfile& profile,
                         const OtnConfig& cfg)
    : Node(sim, id, NodeKind::kOtnEdge),
      profile_(profile),
      cfg_(cfg),
      dest_pool_(cfg.dest_buffer_capacity),
      proxy_rng_(static_cast<std::uint64_t>(id) + 0x9E37, 0xCC) {
    gate_.configure(cfg_.estimator.rate_floor_bps, cfg_.bucket_burst_bytes * 8.0, 0);
    installed_rate_bps_ = cfg_.estimator.rate_floor_bps;
    est_.last_sent.rate_bps = cfg_.estimator.rate_floor_bps;
}

ConnectionStateEntry* OtnEdgeNode::entry_of(ConnId conn) {
    auto it = table_.find(conn);
    return it == table_.end() ? nullptr : &it->second;
}

void OtnEdgeNode::start_control_plane() {
    if (profile_.control_channel) {
        sim_->engine().schedule(sim_->engine().now(), this, EventKind::kDelayProbe);
    }
    if (profile_.dest_estimation || profile_.budget_gate) {
        sim_->engine().schedule(sim_->engine().now() + cfg_.estimator.slot_len, this,
                                EventKind::kSlotBoundary);
        est_.current.start = sim_->engine().now();
        est_.current.slot_len = cfg_.estimator.slot_len;
    }
}

// ---------------------------------------------------------------------------
// packet path
// ---------------------------------------------------------------------------

void OtnEdgeNode::on_packet(const RocePacket& pkt) {
    Flow& f = sim_->flow(pkt.conn_id);
    if (pkt.forward) {
        if (pkt.hop == f.src_otn_fwd_hop) {
            if (!profile_.track_connections) {
                sim_->forward_packet(pkt);
                return;
            }
            if (pkt.kind == PacketKind::kControl && pkt.control_op == ControlOp::kConnSetup) {
                source_on_flow_setup(pkt);
                sim_->forward_packet(pkt);
                return;
            }
            if (pkt.kind == PacketKind::kData) {
                source_on_data(pkt);
                return;
            }
            sim_->forward_packet(pkt);
            return;
        }
        // destination side: pass into the receiving DC (pool-backed queue)
        sim_->forward_packet(pkt);
        return;
    }

    if (pkt.hop == f.dst_otn_rev_hop) {
        bool absorb = false;
        dest_on_reverse(pkt, absorb);
        if (absorb) {
            sim_->packet_consumed();
            return;
        }
        sim_->forward_packet(pkt);
        return;
    }
    if (pkt.hop == f.src_otn_rev_hop && profile_.track_connections) {
        source_on_reverse(pkt);
        return;
    }
    sim_->forward_packet(pkt);
}

void OtnEdgeNode::on_port_tx(const RocePacket& pkt, Port& port) {
    if (!profile_.dest_estimation) return;
    if (pkt.kind != PacketKind::kData || !pkt.forward) return;
    if (port.pool == nullptr) return;  // only DC-facing egress counts as drain
    Flow& f = sim_->flow(pkt.conn_id);
    if (f.dst_otn_fwd_hop < 0 ||
        static_cast<int>(pkt.hop) != f.dst_otn_fwd_hop + 1) {
        return;
    }
    dest_on_data_egress(pkt);
}

// ---------------------------------------------------------------------------
// source role
// ---------------------------------------------------------------------------

void OtnEdgeNode::source_on_flow_setup(const RocePacket& pkt) {
    // duplicate setup for a live connection resets the entry
    ConnectionStateEntry e;
    e.conn = pkt.conn_id;
    e.highest_psn_seen = pkt.psn;
    e.highest_psn_forwarded = pkt.psn;
    e.highest_psn_pseudo_acked = pkt.psn;
    e.highest_psn_end_acked = pkt.psn;
    e.last_end_ack_progress = sim_->engine().now();
    table_[pkt.conn_id] = std::move(e);
}

void OtnEdgeNode::source_on_data(const RocePacket& pkt) {
    ConnectionStateEntry* ep = entry_of(pkt.conn_id);
    if (ep == nullptr) throw SimulationError("DATA at source OTN without a tracked entry");
    ConnectionStateEntry& e = *ep;
    const SimTime now = sim_->engine().now();

    e.arrival_window_bytes += pkt.size();
    if (now - e.arrival_window_start >= cfg_.cnp_min_interval) {
        e.arrival_rate_bps = static_cast<double>(e.arrival_window_bytes) * 8e9 /
                             static_cast<double>(std::max<SimTime>(1, now - e.arrival_window_start));
        e.arrival_window_start = now;
        e.arrival_window_bytes = 0;
    }

    const bool ce_seen = pkt.ecn == EcnBits::kCe;
    if (profile_.cc_proxy) maybe_proxy_cnp(e, ce_seen);

    if (pkt.psn < e.highest_psn_seen) {
        // duplicate from a sender timeout rewind; the relay already owns it
        if (pkt.psn < e.highest_psn_pseudo_acked) emit_pseudo_ack(e);
        sim_->packet_consumed();
        return;
    }
    if (pkt.psn != e.highest_psn_seen) {
        throw SimulationError("psn gap at source OTN on an in-order fabric");
    }
    e.highest_psn_seen = pkt.psn + 1;

    RocePacket fwd = pkt;
    if (profile_.clear_ce_at_source && ce_seen) fwd.ecn = EcnBits::kEct;

    if (!profile_.budget_gate) {
        forward_gated(fwd.conn_id, fwd);
        return;
    }
    if (e.staged.empty() && retx_q_.empty() && gate_.try_consume(fwd.size(), now)) {
        forward_gated(fwd.conn_id, fwd);
        return;
    }
    // hold: release happens in FIFO order per connection as tokens refill
    if (e.staged.empty()) {
        ++staged_conns_;
        bool known = false;
        for (ConnId c : rr_order_) known = known || c == e.conn;
        if (!known) rr_order_.push_back(e.conn);
    }
    e.staged.push_back(fwd);
    e.staged_bytes += fwd.size();
    staging_total_ += fwd.size();
    staging_occupancy_changed();
    if (profile_.cc_proxy) maybe_proxy_cnp(e, false);
    schedule_release();
}

void OtnEdgeNode::forward_gated(ConnId conn, const RocePacket& pkt) {
    ConnectionStateEntry& e = table_.at(conn);
    if (profile_.budget_gate) gated_wire_bytes_ += pkt.size();
    if (!pkt.relay_retx) {
        if (pkt.psn != e.highest_psn_forwarded) {
            throw SimulationError("out-of-order forward at source OTN");
        }
        e.highest_psn_forwarded = pkt.psn + 1;
        if (profile_.pseudo_ack) {
            e.retrans_buffer.push_back({pkt.psn, pkt.payload, pkt.msg_id, pkt.msg_last});
            e.retrans_buffer_bytes += pkt.size();
            emit_pseudo_ack(e);
            arm_relay_rto(e);
        }
    }
    sim_->forward_packet(pkt);
}

void OtnEdgeNode::emit_pseudo_ack(ConnectionStateEntry& e) {
    // cumulative, and only over packets resident in the relay buffer or
    // already end-to-end ACKed
    if (e.highest_psn_forwarded > e.highest_psn_pseudo_acked) {
        e.highest_psn_pseudo_acked = e.highest_psn_forwarded;
    }
    Flow& f = sim_->flow(e.conn);
    RocePacket pa;
    pa.conn_id = e.conn;
    pa.psn = static_cast<std::uint32_t>(e.highest_psn_pseudo_acked);
    pa.kind = PacketKind::kPseudoAck;
    pa.forward = 0;
    pa.hop = static_cast<std::uint8_t>(f.src_otn_rev_hop);
    pa.src = f.src;
    pa.dst = f.dst;
    sim_->metrics().on_wire_enqueue();
    sim_->forward_packet(pa);
}

void OtnEdgeNode::maybe_proxy_cnp(ConnectionStateEntry& e, bool ce_seen) {
    const SimTime now = sim_->engine().now();
    if (!ce_seen) {
        // The sender window already ack-clocks arrivals to the gate rate, so
        // backlog alone is no reason to slow anyone down. Police rates only
        // when the aggregate backlog heads toward the PFC watermark, and then
        // only connections above their fair share of the installed budget;
        // cutting past the share starves the gate (DCQCN pacing cannot
        // refill the window from the rate floor).
        if (staging_total_ <= cfg_.proxy_aggregate_onset) return;
        if (e.staged_bytes <= cfg_.proxy_threshold_bytes) return;
        const double share =
            installed_rate_bps_ / static_cast<double>(std::max<std::uint32_t>(1, staged_conns_));
        if (e.arrival_rate_bps <= 1.1 * share) return;
    }
    if (now - e.last_proxy_cnp < cfg_.cnp_min_interval) return;
    e.last_proxy_cnp = now;
    Flow& f = sim_->flow(e.conn);
    RocePacket cnp;
    cnp.conn_id = e.conn;
    cnp.kind = PacketKind::kCnp;
    cnp.forward = 0;
    cnp.hop = static_cast<std::uint8_t>(f.src_otn_rev_hop);
    cnp.src = f.src;
    cnp.dst = f.dst;
    sim_->metrics().on_wire_enqueue();
    sim_->forward_packet(cnp);
    e.proxy_cnp_count += 1;
}

void OtnEdgeNode::schedule_release() {
    if (release_scheduled_) return;
    std::uint64_t need = 0;
    if (!retx_q_.empty()) {
        need = retx_q_.front().size();
    } else {
        for (std::size_t k = 0; k < rr_order_.size() && need == 0; ++k) {
            const auto& e = table_.at(rr_order_[(rr_cursor_ + k) % rr_order_.size()]);
            if (!e.staged.empty()) need = e.staged.front().size();
        }
    }
    if (need == 0) return;
    const SimTime now = sim_->engine().now();
    const SimTime wait = std::max<SimTime>(1, gate_.ns_until_available(need, now));
    release_scheduled_ = true;
    sim_->engine().schedule(now + wait, this, EventKind::kStagingRelease);
}

void OtnEdgeNode::drain_staging() {
    const SimTime now = sim_->engine().now();
    while (!retx_q_.empty()) {
        RocePacket& pkt = retx_q_.front();
        if (profile_.budget_gate && !gate_.try_consume(pkt.size(), now)) {
            schedule_release();
            return;
        }
        RocePacket out = pkt;
        retx_q_.pop_front();
        forward_gated(out.conn_id, out);
    }
    while (staging_total_ > 0) {
        ConnectionStateEntry* next = nullptr;
        for (std::size_t k = 0; k < rr_order_.size(); ++k) {
            ConnectionStateEntry& cand = table_.at(rr_order_[(rr_cursor_ + k) % rr_order_.size()]);
            if (!cand.staged.empty()) {
                next = &cand;
                rr_cursor_ = (rr_cursor_ + k + 1) % rr_order_.size();
                break;
            }
        }
        if (next == nullptr) return;
        RocePacket& pkt = next->staged.front();
        if (!gate_.try_consume(pkt.size(), now)) {
            schedule_release();
            return;
        }
        RocePacket out = pkt;
        next->staged.pop_front();
        next->staged_bytes -= out.size();
        staging_total_ -= out.size();
        if (next->staged.empty() && staged_conns_ > 0) --staged_conns_;
        forward_gated(out.conn_id, out);
    }
    staging_occupancy_changed();
}

void OtnEdgeNode::staging_occupancy_changed() {
    if (!staging_xoff_sent_ && staging_total_ > cfg_.staging_xoff) {
        staging_xoff_sent_ = true;
        emit_pfc_upstream(true);
    } else if (staging_xoff_sent_ && staging_total_ < cfg_.staging_xon) {
        staging_xoff_sent_ = false;
        emit_pfc_upstream(false);
    }
}

SimTime OtnEdgeNode::relay_rto() const {
    const SimTime d = measured_delay_ > 0 ? measured_delay_ : sim_->config().topology.otn_prop();
    return std::max(cfg_.relay_min_rto, 3 * (2 * d + 2 * sim_->intra_base_rtt()));
}

void OtnEdgeNode::arm_relay_rto(ConnectionStateEntry& e) {
    e.relay_rto_deadline = sim_->engine().now() + relay_rto();
    if (!e.relay_rto_armed) {
        e.relay_rto_armed = true;
        sim_->engine().schedule(e.relay_rto_deadline, this, EventKind::kRelayRtoTimer, e.conn);
    }
}

void OtnEdgeNode::relay_retransmit(ConnectionStateEntry& e, std::uint64_t from_psn) {
    const SimTime now = sim_->engine().now();
    if (e.last_relay_retx_psn == from_psn && now - e.last_relay_retx_at < relay_rto() / 2) {
        return;  // a pass for this gap is already in flight
    }
    e.last_relay_retx_psn = from_psn;
    e.last_relay_retx_at = now;
    Flow& f = sim_->flow(e.conn);
    for (const auto& buf : e.retrans_buffer) {
        if (buf.psn < from_psn) continue;
        RocePacket pkt;
        pkt.conn_id = e.conn;
        pkt.psn = static_cast<std::uint32_t>(buf.psn);
        pkt.kind = PacketKind::kData;
        pkt.ecn = EcnBits::kEct;
        pkt.forward = 1;
        pkt.hop = static_cast<std::uint8_t>(f.src_otn_fwd_hop);
        pkt.payload = buf.payload;
        pkt.msg_id = buf.msg_id;
        pkt.msg_last = buf.msg_last;
        pkt.relay_retx = 1;
        pkt.src = f.src;
        pkt.dst = f.dst;
        sim_->metrics().on_wire_enqueue();
        retx_q_.push_back(pkt);
    }
    drain_staging();
}

void OtnEdgeNode::source_on_reverse(const RocePacket& pkt) {
    ConnectionStateEntry* ep = entry_of(pkt.conn_id);
    if (ep == nullptr) {
        sim_->forward_packet(pkt);
        return;
    }
    ConnectionStateEntry& e = *ep;
    const SimTime now = sim_->engine().now();
    Flow& f = sim_->flow(pkt.conn_id);

    switch (pkt.kind) {
        case PacketKind::kAck: {
            const std::uint64_t p = pkt.psn;
            if (p > e.highest_psn_end_acked) {
                e.highest_psn_end_acked = p;
                e.last_end_ack_progress = now;
                while (!e.retrans_buffer.empty() && e.retrans_buffer.front().psn < p) {
                    e.retrans_buffer_bytes -=
                        kRoceHeaderBytes + e.retrans_buffer.front().payload;
                    e.retrans_buffer.pop_front();
                }
                if (e.relay_rto_armed) e.relay_rto_deadline = now + relay_rto();
                // true delivery settles message completion at the sender
                RocePacket rec;
                rec.conn_id = e.conn;
                rec.psn = pkt.psn;
                rec.kind = PacketKind::kControl;
                rec.control_op = ControlOp::kCompletionRecord;
                rec.forward = 0;
                rec.hop = static_cast<std::uint8_t>(f.src_otn_rev_hop);
                rec.src = f.src;
                rec.dst = f.dst;
                sim_->metrics().on_wire_enqueue();
                sim_->forward_packet(rec);
            }
            if (p <= e.highest_psn_pseudo_acked) {
                sim_->packet_consumed();  // window credit already granted
            } else {
                e.highest_psn_pseudo_acked = p;
                sim_->forward_packet(pkt);
            }
            return;
        }
        case PacketKind::kNack: {
            const std::uint64_t p = pkt.psn;
            if (p > e.highest_psn_end_acked) {
                // cumulative: everything below p was received
                e.highest_psn_end_acked = p;
                e.last_end_ack_progress = now;
                while (!e.retrans_buffer.empty() && e.retrans_buffer.front().psn < p) {
                    e.retrans_buffer_bytes -=
                        kRoceHeaderBytes + e.retrans_buffer.front().payload;
                    e.retrans_buffer.pop_front();
                }
            }
            if (!e.retrans_buffer.empty() && e.retrans_buffer.front().psn == p) {
                relay_retransmit(e, p);
                arm_relay_rto(e);
                sim_->packet_consumed();
                return;
            }
            // below the oldest buffered psn: pass through to the sender
            sim_->forward_packet(pkt);
            return;
        }
        default:
            sim_->forward_packet(pkt);
            return;
    }
}

// ---------------------------------------------------------------------------
// destination role
// ---------------------------------------------------------------------------

double OtnEdgeNode::dc_facing_aggregate_bps() const {
    double total = 0.0;
    for (const auto& p : ports_) {
        if (p->pool != nullptr) total += p->rate_bps();
    }
    return total;
}

void OtnEdgeNode::dest_on_data_egress(const RocePacket& pkt) {
    est_.current.delivered_bytes += pkt.payload;
    auto& pending = est_.pending_acks[pkt.conn_id];
    pending.emplace_back(pkt.psn, sim_->engine().now());
    if (pending.size() > 65536) pending.pop_front();
}

void OtnEdgeNode::dest_on_reverse(const RocePacket& pkt, bool& absorb) {
    absorb = false;
    const SimTime now = sim_->engine().now();
    if (pkt.kind == PacketKind::kAck || pkt.kind == PacketKind::kNack) {
        if (profile_.dest_estimation) {
            auto it = est_.pending_acks.find(pkt.conn_id);
            if (it != est_.pending_acks.end()) {
                auto& q = it->second;
                while (!q.empty() && q.front().first < pkt.psn) {
                    est_.current.ack_return_sum += now - q.front().second;
                    est_.current.ack_return_count += 1;
                    q.pop_front();
                }
            }
        }
        return;
    }
    if (pkt.kind == PacketKind::kCnp) {
        if (profile_.dest_estimation) {
            est_.current.cnp_count += 1;
            const double cnp_per_ms = static_cast<double>(est_.current.cnp_count) * 1e6 /
                                      static_cast<double>(cfg_.estimator.slot_len);
            // at most one immediate tightening per slot, and no re-strike
            // while the previous one is still traveling to the source: a
            // second halving inside the install lag punishes the same event
            const SimTime strike_spacing = std::max<SimTime>(2 * measured_delay_,
                                                             cfg_.estimator.slot_len);
            if (!est_.tightened_this_slot && cnp_per_ms > cfg_.estimator.theta_cnp_per_ms &&
                now - est_.last_tighten_at >= strike_spacing) {
                est_.tightened_this_slot = true;
                est_.congestion_seen = true;
                est_.periods_since_tighten = 0;
                est_.last_tighten_at = now;
                RateBudget tightened = est_.last_sent;
                tightened.rate_bps = std::max(cfg_.estimator.rate_floor_bps,
                                              est_.last_sent.rate_bps * cfg_.estimator.beta);
                est_.last_sent = tightened;
                emit_budget_update(true);
            }
        }
        absorb = profile_.absorb_cnp;
        return;
    }
}

void OtnEdgeNode::close_slot() {
    const SimTime now = sim_->engine().now();
    SlotObservation obs = est_.current;
    obs.slot_len = cfg_.estimator.slot_len;
    obs.level = classify_slot(obs, cfg_.estimator);

    const bool active =
        obs.delivered_bytes > 0 || obs.ack_return_count > 0 || obs.cnp_count > 0;
    if (active) {
        // idle slots carry no evidence about drain capacity; the recurrent
        // communication phases are what the budget must track
        est_.any_traffic = true;
        est_.level_counts[static_cast<int>(obs.level)] += 1;
        est_.active_slots_this_period += 1;
        if (obs.level != CongestionLevel::kLow) est_.congestion_seen = true;
        est_.history.push_back(obs);
        while (est_.history.size() > cfg_.estimator.history_slots) est_.history.pop_front();
    }

    est_.slots_closed += 1;
    est_.slots_since_update += 1;
    if (est_.slots_since_update >= cfg_.estimator.update_every_slots) {
        est_.slots_since_update = 0;
        if (est_.periods_since_tighten < 1000) est_.periods_since_tighten += 1;
        // idle periods (compute gaps) carry no new evidence: hold the budget,
        // refreshing only against staleness
        const bool idle_period = est_.active_slots_this_period == 0;
        est_.active_slots_this_period = 0;
        if (idle_period && est_.any_traffic) {
            if (sim_->engine().now() - est_.last_emit_at >= cfg_.budget_valid_for / 2) {
                emit_budget_update(false);
            }
        } else if (est_.any_traffic) {
            auto partition = detect_stable_windows(est_.history, cfg_.estimator);
            EstimateInputs in;
            in.current_level = obs.level;
            in.last_sent_bps = est_.last_sent.rate_bps;
            in.congestion_seen = est_.congestion_seen;
            in.periods_since_tighten = est_.periods_since_tighten;
            // evidence of the achieved gate rate: the best recent slot (a
            // slot at ~budget proves the gate ran there; means are skewed by
            // partial slots at phase boundaries)
            const std::size_t tail = std::min<std::size_t>(cfg_.estimator.update_every_slots,
                                                           est_.history.size());
            double recent = 0.0;
            for (std::size_t k = est_.history.size() - tail; k < est_.history.size(); ++k) {
                recent = std::max(recent, est_.history[k].delivered_bps());
            }
            in.recent_delivered_bps = recent;
            if (recent > est_.best_evidenced_bps) est_.best_evidenced_bps = recent;
            RateBudget next =
                estimate_rate_budget(est_.history, partition, in, est_.last_sent, cfg_.estimator);
            const double drain_cap = dc_facing_aggregate_bps();
            if (drain_cap > 0.0) {
                next.rate_bps = std::min(next.rate_bps,
                                         std::max(cfg_.estimator.rate_floor_bps, 0.95 * drain_cap));
            }
            static const bool debug_est = std::getenv("MATCHRDMA_DEBUG_EST") != nullptr;
            if (debug_est) {
                std::size_t stable_n = 0;
                for (const auto& r : partition) if (r.stable) stable_n += r.count;
                std::fprintf(stderr,
                             "[est] t=%.1fms level=%s recent=%.2fG last=%.2fG next=%.2fG "
                             "hist=%zu stable=%zu\n",
                             now / 1e6, to_string(obs.level), in.recent_delivered_bps / 1e9,
                             est_.last_sent.rate_bps / 1e9, next.rate_bps / 1e9,
                             est_.history.size(), stable_n);
            }
            // a raised budget needs a loop lag (2D + one period) to show up
            // in the delivered evidence; suppress down-estimates until the
            // evidence reflects the raise or a generous timeout passes, but
            // never delay a HIGH tightening
            const SimTime period_ns =
                static_cast<SimTime>(cfg_.estimator.update_every_slots) * cfg_.estimator.slot_len;
            const SimTime hold_timeout = 2 * (2 * measured_delay_ + period_ns) + period_ns;
            const bool evidence_ok =
                in.recent_delivered_bps >= 0.9 * est_.last_sent.rate_bps;
            const bool manifest_hold = !evidence_ok &&
                                       now - est_.rate_raised_at < hold_timeout &&
                                       obs.level != CongestionLevel::kHigh;
            // achieved delivery over the last period: self-evidently
            // sustainable, so down-corrections never undershoot it
            const double recent_max = in.recent_delivered_bps;
            // cold pipelining: while no congestion has ever been observed,
            // keep doubling ahead of the evidence loop, bounded relative to
            // the best evidenced rate
            const bool cold_pipeline =
                !est_.congestion_seen && obs.level == CongestionLevel::kLow &&
                est_.last_sent.rate_bps * cfg_.estimator.probe_growth_cold <=
                    cfg_.estimator.probe_pipeline_cap *
                        std::max(est_.best_evidenced_bps, cfg_.estimator.rate_floor_bps) &&
                (drain_cap <= 0.0 ||
                 est_.last_sent.rate_bps * cfg_.estimator.probe_growth_cold <= 0.7 * drain_cap);
            if (obs.level == CongestionLevel::kHigh) {
                // the reactive tightening path owns HIGH; re-estimating here
                // would stack a second cut on the same congestion event
                if (now - est_.last_emit_at >= cfg_.budget_valid_for / 2) {
                    emit_budget_update(false);
                }
            } else if (cold_pipeline && !evidence_ok) {
                RateBudget up = est_.last_sent;
                up.rate_bps = std::min(cfg_.estimator.capacity_bps,
                                       up.rate_bps * cfg_.estimator.probe_growth_cold);
                if (drain_cap > 0.0) {
                    up.rate_bps = std::min(up.rate_bps,
                                           std::max(cfg_.estimator.rate_floor_bps,
                                                    0.95 * drain_cap));
                }
                if (up.rate_bps > est_.last_sent.rate_bps) {
                    est_.rate_raised_at = now;
                    est_.last_sent = up;
                    emit_budget_update(false);
                } else if (now - est_.last_emit_at >= cfg_.budget_valid_for / 2) {
                    emit_budget_update(false);
                }
                est_.suppressed_updates += 1;
            } else if (next.rate_bps < est_.last_sent.rate_bps &&
                       (manifest_hold ||
                        in.recent_delivered_bps >= 0.95 * est_.last_sent.rate_bps)) {
                // gate-limited and quiet: delivery tracks the budget, so a
                // lower mixture estimate is stale history, not a signal
                est_.suppressed_updates += 1;
                if (now - est_.last_emit_at >= cfg_.budget_valid_for / 2) {
                    emit_budget_update(false);  // keepalive of the held rate
                }
            } else {
                if (next.rate_bps < est_.last_sent.rate_bps) {
                    next.rate_bps = std::max(next.rate_bps,
                                             std::max(0.95 * recent_max,
                                                      cfg_.estimator.rate_floor_bps));
                }
                const double base =
                    std::max(est_.last_sent.rate_bps, cfg_.estimator.rate_floor_bps);
                const double rel = std::abs(next.rate_bps - est_.last_sent.rate_bps) / base;
                const bool keepalive = now - est_.last_emit_at >= cfg_.budget_valid_for / 2;
                if (rel >= cfg_.estimator.suppress_delta || keepalive) {
                    if (next.rate_bps > est_.last_sent.rate_bps) est_.rate_raised_at = now;
                    est_.last_sent = next;
                    emit_budget_update(false);
                } else {
                    est_.suppressed_updates += 1;
                }
            }
        }
    }

    est_.current = SlotObservation{};
    est_.current.slot_index = est_.slots_closed;
    est_.current.start = now;
    est_.current.slot_len = cfg_.estimator.slot_len;
    est_.tightened_this_slot = false;
}

void OtnEdgeNode::emit_budget_update(bool urgent) {
    (void)urgent;
    const SimTime now = sim_->engine().now();
    est_.epoch += 1;
    est_.last_sent.epoch = est_.epoch;
    est_.last_sent.issued_at = now;
    est_.last_sent.valid_for = cfg_.budget_valid_for;
    est_.last_emit_at = now;

    const SimTime arrive = now + sim_->config().topology.otn_prop();
    RocePacket carrier;
    carrier.psn = static_cast<std::uint32_t>(est_.epoch);
    carrier.payload = static_cast<std::uint32_t>(cfg_.budget_valid_for / kMicrosecond);
    sim_->metrics().on_control_message(kControlMsgBytes);
    sim_->engine().schedule_packet(arrive, peer_, EventKind::kControlDelivery, carrier,
                                   kCtrlBudget,
                                   std::bit_cast<std::uint64_t>(est_.last_sent.rate_bps));
    // a concise congestion summary rides with every budget update
    RocePacket summary;
    summary.msg_id = static_cast<std::uint32_t>(
        est_.history.empty() ? 0 : static_cast<int>(est_.history.back().level));
    sim_->metrics().on_control_message(kControlMsgBytes);
    sim_->engine().schedule_packet(arrive, peer_, EventKind::kControlDelivery, summary,
                                   kCtrlSummary);
}

void OtnEdgeNode::install_budget(const RateBudget& budget, SimTime now) {
    if (budget.epoch <= installed_epoch_) return;  // stale epoch: discard
    installed_epoch_ = budget.epoch;
    installed_rate_bps_ = budget.rate_bps;
    installed_at_ = now;
    installed_valid_for_ = budget.valid_for;
    gate_fill_integral_bits_ +=
        gate_.fill_rate_bps() * static_cast<double>(now - last_fill_change_);
    last_fill_change_ = now;
    gate_.set_fill_rate(budget.rate_bps, now);
    sim_->record_budget_install(now, budget.epoch, budget.rate_bps);
    sim_->engine().schedule(now + budget.valid_for, this, EventKind::kBudgetRefresh,
                            budget.epoch);
    // a release scheduled under the old fill rate may sit far in the future;
    // let the drain reschedule against the new rate (stale fires are no-ops)
    release_scheduled_ = false;
    drain_staging();
}

void OtnEdgeNode::on_control_message(const Event& ev) {
    const SimTime now = sim_->engine().now();
    switch (ev.a) {
        case kCtrlDelayProbe: {
            sim_->metrics().on_control_message(kControlMsgBytes);
            sim_->engine().schedule(now + sim_->config().topology.otn_prop(), peer_,
                                    EventKind::kControlDelivery, kCtrlDelayEcho, ev.b);
            return;
        }
        case kCtrlDelayEcho: {
            const SimTime sent_at = static_cast<SimTime>(ev.b);
            measured_delay_ = (now - sent_at) / 2;
            return;
        }
        case kCtrlBudget: {
            RateBudget b;
            b.epoch = ev.pkt.psn;
            b.valid_for = static_cast<SimTime>(ev.pkt.payload) * kMicrosecond;
            b.rate_bps = std::bit_cast<double>(ev.b);
            b.issued_at = now - sim_->config().topology.otn_prop();
            install_budget(b, now);
            return;
        }
        case kCtrlSummary:
            last_peer_level_ = static_cast<CongestionLevel>(ev.pkt.msg_id);
            return;
        default:
            return;
    }
}

void OtnEdgeNode::on_timer(const Event& ev) {
    const SimTime now = sim_->engine().now();
    switch (ev.kind) {
        case EventKind::kDelayProbe:
            sim_->metrics().on_control_message(kControlMsgBytes);
            sim_->engine().schedule(now + sim_->config().topology.otn_prop(), peer_,
                                    EventKind::kControlDelivery, kCtrlDelayProbe,
                                    static_cast<std::uint64_t>(now));
            sim_->engine().schedule(now + cfg_.probe_interval, this, EventKind::kDelayProbe);
            return;
        case EventKind::kControlDelivery:
            on_control_message(ev);
            return;
        case EventKind::kSlotBoundary:
            if (profile_.dest_estimation) close_slot();
            if (profile_.budget_gate) sample_gate();
            sim_->engine().schedule(now + cfg_.estimator.slot_len, this,
                                    EventKind::kSlotBoundary);
            return;
        case EventKind::kStagingRelease:
            release_scheduled_ = false;
            drain_staging();
            return;
        case EventKind::kRelayRtoTimer: {
            ConnectionStateEntry* ep = entry_of(static_cast<ConnId>(ev.a));
            if (ep == nullptr) return;
            ConnectionStateEntry& e = *ep;
            e.relay_rto_armed = false;
            if (e.retrans_buffer.empty()) return;
            if (now < e.relay_rto_deadline) {
                e.relay_rto_armed = true;
                sim_->engine().schedule(e.relay_rto_deadline, this, EventKind::kRelayRtoTimer,
                                        e.conn);
                return;
            }
            relay_retransmit(e, e.retrans_buffer.front().psn);
            arm_relay_rto(e);
            return;
        }
        case EventKind::kBudgetRefresh:
            // stale unless a newer epoch has been installed since
            if (ev.a == installed_epoch_ && profile_.budget_gate) {
                gate_fill_integral_bits_ +=
                    gate_.fill_rate_bps() * static_cast<double>(now - last_fill_change_);
                last_fill_change_ = now;
                installed_rate_bps_ = cfg_.estimator.rate_floor_bps;
                gate_.set_fill_rate(installed_rate_bps_, now);
                sim_->record_budget_install(now, installed_epoch_, installed_rate_bps_);
            }
            return;
        default:
            return;
    }
}

void OtnEdgeNode::sample_gate() {
    const SimTime now = sim_->engine().now();
    gate_fill_integral_bits_ +=
        gate_.fill_rate_bps() * static_cast<double>(now - last_fill_change_);
    last_fill_change_ = now;
    gate_samples_.push_back({now, gated_wire_bytes_, gate_fill_integral_bits_});
}

}  // namespace matchrdma
