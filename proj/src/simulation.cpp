#include "matchrdma/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace matchrdma {

namespace {
std::uint64_t pair_key(NodeId a, NodeId b) {
    return (static_cast<std::uint64_t>(a) << 16) | b;
}
}  // namespace

Simulation::Simulation(const ScenarioConfig& cfg)
    : cfg_(cfg), layout_(cfg.topology), jitter_rng_(cfg.seed, 0x71) {
    // reference intra-DC RTT: cross-leaf server pair, MTU-sized data out,
    // header-only ACK back
    const TopologyConfig& t = cfg_.topology;
    const double fab = t.fabric_link_gbps * 1e9;
    const double srv = t.server_link_gbps * 1e9;
    const std::uint32_t wire = cfg_.transport.mtu_payload + kRoceHeaderBytes;
    double one_way = 4.0 * static_cast<double>(t.intra_prop);
    one_way += serialization_ns(wire, srv) + 3 * serialization_ns(wire, fab);
    double back = 4.0 * static_cast<double>(t.intra_prop);
    back += serialization_ns(kRoceHeaderBytes, srv) + 3 * serialization_ns(kRoceHeaderBytes, fab);
    intra_base_rtt_ = static_cast<SimTime>(one_way + back);

    if (!cfg_.otn_theta_ack_set) {
        // destination-side loop threshold: 3x the intra-DC base RTT
        cfg_.otn.estimator.theta_ack = 3 * intra_base_rtt_;
    }

    build_topology();

    WorkloadConfig wl = cfg_.workload;
    if (wl.continuous && wl.iterations > 0) {
        // enough planned iterations to outlast any horizon; the run stops at
        // max_duration without that counting as a failure
        std::uint64_t bytes_per_iter = wl.msg_size * wl.concurrency;
        std::uint64_t horizon_bytes = static_cast<std::uint64_t>(
            cfg_.topology.aggregate_otn_bps() / 8e9 * static_cast<double>(cfg_.max_duration));
        wl.iterations = std::max<std::uint32_t>(
            wl.iterations,
            static_cast<std::uint32_t>(horizon_bytes / std::max<std::uint64_t>(1, bytes_per_iter)) +
                16);
    }
    plan_ = generate_schedule(wl, cfg_.topology.servers_per_dc(),
                              cfg_.topology.servers_per_dc(), cfg_.seed);
    if (cfg_.workload.intra_dc_load > 0.0) {
        background_ = std::make_unique<BackgroundGenerator>(
            cfg_.workload, cfg_.topology.servers_per_dc(),
            cfg_.topology.aggregate_server_edge_bps(), cfg_.seed);
    }
}

Simulation::~Simulation() = default;

ServerNode* Simulation::server(std::uint32_t dc, std::uint32_t idx) {
    return static_cast<ServerNode*>(nodes_[layout_.server(dc, idx)].get());
}

OtnEdgeNode* Simulation::otn_edge(std::uint32_t dc) {
    return static_cast<OtnEdgeNode*>(nodes_[layout_.otn_edge(dc)].get());
}

void Simulation::connect(NodeId a, NodeId b, double rate_bps, SimTime prop, bool pausable,
                         bool ecn, std::uint64_t capacity) {
    Node* na = nodes_[a].get();
    Node* nb = nodes_[b].get();
    Port* pab = na->add_port(b, rate_bps, prop);
    Port* pba = nb->add_port(a, rate_bps, prop);
    for (Port* p : {pab, pba}) {
        p->data_capacity = capacity;
        p->ecn.enabled = ecn;
        p->pfc.enabled = pausable;
        p->rng = Rng(cfg_.seed, 0xEC00 + (static_cast<std::uint64_t>(p->owner()->id()) << 8) +
                                    p->index());
    }
    nb->upstreams.push_back({na, pab->index(), prop, pausable});
    na->upstreams.push_back({nb, pba->index(), prop, pausable});
}

void Simulation::build_topology() {
    const TopologyConfig& t = cfg_.topology;
    if (t.leaves < 1 || t.spines < 1 || t.servers_per_leaf < 1 || t.otn_parallel_links < 1) {
        throw SimulationError("topology counts must be >= 1");
    }
    if (t.distance_km < 1 || t.distance_km > 1000) {
        throw SimulationError("distance_km must be in [1, 1000]");
    }

    nodes_.resize(layout_.total_nodes());
    const SchemeProfile profile = scheme_profile(cfg_.scheme);
    OtnConfig otn_cfg = cfg_.otn;
    otn_cfg.estimator.capacity_bps = t.aggregate_otn_bps();

    for (std::uint32_t dc = 0; dc < 2; ++dc) {
        for (std::uint32_t s = 0; s < t.servers_per_dc(); ++s) {
            const NodeId id = layout_.server(dc, s);
            nodes_[id] = std::make_unique<ServerNode>(this, id, cfg_.transport);
        }
        for (std::uint32_t l = 0; l < t.leaves; ++l) {
            const NodeId id = layout_.leaf(dc, l);
            nodes_[id] = std::make_unique<SwitchNode>(this, id, NodeKind::kLeaf);
        }
        for (std::uint32_t sp = 0; sp < t.spines; ++sp) {
            const NodeId id = layout_.spine(dc, sp);
            nodes_[id] = std::make_unique<SwitchNode>(this, id, NodeKind::kSpine);
        }
        const NodeId oid = layout_.otn_edge(dc);
        nodes_[oid] = std::make_unique<OtnEdgeNode>(this, oid, profile, otn_cfg);
    }

    const double srv = t.server_link_gbps * 1e9;
    const double fab = t.fabric_link_gbps * 1e9;
    for (std::uint32_t dc = 0; dc < 2; ++dc) {
        for (std::uint32_t s = 0; s < t.servers_per_dc(); ++s) {
            connect(layout_.server(dc, s), layout_.leaf(dc, layout_.leaf_of_server_idx(s)), srv,
                    t.intra_prop, true, false, t.switch_queue_capacity);
        }
        for (std::uint32_t l = 0; l < t.leaves; ++l) {
            for (std::uint32_t sp = 0; sp < t.spines; ++sp) {
                connect(layout_.leaf(dc, l), layout_.spine(dc, sp), fab, t.intra_prop, true,
                        true, t.switch_queue_capacity);
            }
        }
        for (std::uint32_t sp = 0; sp < t.spines; ++sp) {
            connect(layout_.spine(dc, sp), layout_.otn_edge(dc), fab, t.intra_prop, true, true,
                    t.switch_queue_capacity);
        }
    }
    // parallel long-haul links; PFC never crosses them
    for (std::uint32_t l = 0; l < t.otn_parallel_links; ++l) {
        connect(layout_.otn_edge(0), layout_.otn_edge(1), t.otn_link_gbps * 1e9, t.otn_prop(),
                false, true, t.otn_egress_queue_capacity);
    }

    // server-facing leaf queues mark ECN too (they are switch egress)
    for (std::uint32_t dc = 0; dc < 2; ++dc) {
        for (std::uint32_t l = 0; l < t.leaves; ++l) {
            Node* leaf = nodes_[layout_.leaf(dc, l)].get();
            for (auto& p : leaf->ports()) {
                const_cast<Port*>(p.get())->ecn.enabled = true;
            }
        }
        // DC-facing OTN egress charges the shared runtime buffer and is
        // allowed to drop: PFC cannot reach back across the long haul
        OtnEdgeNode* edge = otn_edge(dc);
        for (auto& p : edge->ports()) {
            Port* port = p.get();
            Node* peer = nodes_[port->peer()].get();
            if (peer->kind() == NodeKind::kSpine) {
                port->pool = &edge->dest_pool();
                port->pfc.enabled = false;
                port->data_capacity = edge->dest_pool().capacity();
            }
        }
    }

    otn_edge(0)->set_peer(otn_edge(1));
    otn_edge(1)->set_peer(otn_edge(0));

    if (t.dc_facing_gbps > 0.0) {
        for (std::uint32_t dc = 0; dc < 2; ++dc) {
            OtnEdgeNode* edge = otn_edge(dc);
            for (auto& p : edge->ports()) {
                if (p->pool != nullptr) {
                    p->set_rate(t.dc_facing_gbps * 1e9 / t.spines);
                }
            }
        }
    }
}

ConnId Simulation::open_connection(NodeId src, NodeId dst, FlowClass cls) {
    auto flow = std::make_unique<Flow>();
    Flow& f = *flow;
    f.id = static_cast<ConnId>(flows_.size());
    f.src = src;
    f.dst = dst;
    f.flow_class = cls;

    const TopologyConfig& t = cfg_.topology;
    const std::uint32_t src_dc = layout_.dc_of_server(src);
    const std::uint32_t dst_dc = layout_.dc_of_server(dst);
    const std::uint32_t src_idx = src - layout_.server(src_dc, 0);
    const std::uint32_t dst_idx = dst - layout_.server(dst_dc, 0);
    const std::uint32_t spine_a = f.id % t.spines;
    const std::uint32_t spine_b = (f.id / t.spines) % t.spines;
    const std::uint32_t otn_link = f.id % t.otn_parallel_links;

    auto port = [&](NodeId from, NodeId to) {
        Port* p = nodes_[from]->port_to(to);
        if (p == nullptr) throw SimulationError("missing link on routed path");
        return p;
    };

    if (src_dc == dst_dc) {
        const std::uint32_t leaf_s = layout_.leaf_of_server_idx(src_idx);
        const std::uint32_t leaf_d = layout_.leaf_of_server_idx(dst_idx);
        f.fwd.push_back(port(src, layout_.leaf(src_dc, leaf_s)));
        if (leaf_s != leaf_d) {
            f.fwd.push_back(port(layout_.leaf(src_dc, leaf_s), layout_.spine(src_dc, spine_a)));
            f.fwd.push_back(port(layout_.spine(src_dc, spine_a), layout_.leaf(src_dc, leaf_d)));
        }
        f.fwd.push_back(port(layout_.leaf(src_dc, leaf_d), dst));
    } else {
        const std::uint32_t leaf_s = layout_.leaf_of_server_idx(src_idx);
        const std::uint32_t leaf_d = layout_.leaf_of_server_idx(dst_idx);
        f.fwd.push_back(port(src, layout_.leaf(src_dc, leaf_s)));
        f.fwd.push_back(port(layout_.leaf(src_dc, leaf_s), layout_.spine(src_dc, spine_a)));
        f.fwd.push_back(port(layout_.spine(src_dc, spine_a), layout_.otn_edge(src_dc)));
        f.src_otn_fwd_hop = static_cast<int>(f.fwd.size());
        // hop index of the source OTN's own egress: the otn_link-th parallel
        // port toward the peer edge
        Node* edge_a = nodes_[layout_.otn_edge(src_dc)].get();
        std::uint32_t seen = 0;
        Port* lh = nullptr;
        for (auto& p : edge_a->ports()) {
            if (nodes_[p->peer()]->kind() == NodeKind::kOtnEdge) {
                if (seen == otn_link) {
                    lh = p.get();
                    break;
                }
                ++seen;
            }
        }
        f.fwd.push_back(lh);
        f.dst_otn_fwd_hop = static_cast<int>(f.fwd.size());
        f.fwd.push_back(port(layout_.otn_edge(dst_dc), layout_.spine(dst_dc, spine_b)));
        f.fwd.push_back(port(layout_.spine(dst_dc, spine_b), layout_.leaf(dst_dc, leaf_d)));
        f.fwd.push_back(port(layout_.leaf(dst_dc, leaf_d), dst));
    }

    // reverse path mirrors the forward one
    f.rev.reserve(f.fwd.size());
    for (auto it = f.fwd.rbegin(); it != f.fwd.rend(); ++it) {
        Port* fp = *it;
        NodeId from = fp->peer();
        NodeId to = fp->owner()->id();
        if (fp->owner()->kind() == NodeKind::kOtnEdge &&
            nodes_[fp->peer()]->kind() == NodeKind::kOtnEdge) {
            // same parallel link back
            Node* edge_b = nodes_[from].get();
            std::uint32_t seen = 0;
            Port* back = nullptr;
            for (auto& p : edge_b->ports()) {
                if (nodes_[p->peer()]->kind() == NodeKind::kOtnEdge) {
                    if (seen == otn_link) {
                        back = p.get();
                        break;
                    }
                    ++seen;
                }
            }
            f.rev.push_back(back);
        } else {
            f.rev.push_back(port(from, to));
        }
    }
    if (f.src_otn_fwd_hop >= 0) {
        // a node reached after k forward hops is reached after n-k reverse
        // hops, which is also the index of its reverse egress port
        const int n = static_cast<int>(f.fwd.size());
        f.dst_otn_rev_hop = n - f.dst_otn_fwd_hop;
        f.src_otn_rev_hop = n - f.src_otn_fwd_hop;
    }

    for (Port* p : f.fwd) f.base_rtt += p->prop_ns();
    for (Port* p : f.rev) f.base_rtt += p->prop_ns();
    const std::uint32_t wire = cfg_.transport.mtu_payload + kRoceHeaderBytes;
    for (Port* p : f.fwd) {
        f.base_rtt += static_cast<SimTime>(serialization_ns(wire, p->rate_bps()));
    }

    ServerNode* snd = static_cast<ServerNode*>(nodes_[src].get());
    snd->attach_sender(f);
    f.rcv.conn = f.id;

    pair_conn_[pair_key(src, dst)] = f.id;
    flows_.push_back(std::move(flow));

    // connection setup traverses the path so the source OTN can learn it
    RocePacket setup;
    setup.conn_id = f.id;
    setup.psn = 0;
    setup.kind = PacketKind::kControl;
    setup.control_op = ControlOp::kConnSetup;
    setup.forward = 1;
    setup.hop = 0;
    setup.src = src;
    setup.dst = dst;
    metrics_.on_wire_enqueue();
    forward_packet(setup);
    return f.id;
}

std::uint32_t Simulation::submit_message(ConnId conn, std::uint64_t size, bool barrier_counted) {
    Flow& f = flow(conn);
    Message msg;
    msg.msg_id = next_msg_id_++;
    msg.size = size;
    msg.created_at = engine_.now();
    msg.flow_class = f.flow_class;
    msg.barrier_counted = barrier_counted;
    static_cast<ServerNode*>(nodes_[f.src].get())->submit(f, msg);
    ++submitted_messages_;
    return msg.msg_id;
}

void Simulation::forward_packet(RocePacket pkt) {
    Flow& f = flow(pkt.conn_id);
    auto& path = pkt.forward ? f.fwd : f.rev;
    if (pkt.hop >= path.size()) throw SimulationError("packet walked off its path");
    Port* p = path[pkt.hop];
    pkt.hop += 1;
    if (p->enqueue(pkt, engine_.now()) == EnqueueResult::kDropped) {
        metrics_.on_wire_dropped(pkt.payload);
    }
}

void Simulation::packet_on_wire(const RocePacket& pkt, NodeId to, SimTime arrive_at) {
    ++in_flight_packets_;
    engine_.schedule_packet(arrive_at, nodes_[to].get(), EventKind::kPacketArrive, pkt);
}

void Simulation::packet_on_wire_from(const RocePacket& pkt, NodeId from, NodeId to,
                                     SimTime arrive_at) {
    RocePacket stamped = pkt;
    stamped.ingress_node = from;
    packet_on_wire(stamped, to, arrive_at);
}

void Simulation::on_message_completed(Flow& f, Message& msg) {
    ++completed_messages_;
    if (msg.barrier_counted && !workload_done_) {
        if (iteration_outstanding_ == 0) {
            throw SimulationError("barrier accounting underflow");
        }
        --iteration_outstanding_;
        if (iteration_outstanding_ == 0) {
            // the transfer occupies the network until its last payload byte
            // lands; the completion-record return leg is not data movement
            metrics_.add_active_window(
                std::max<SimTime>(0, last_inter_delivery_at_ - iteration_issue_at_));
            ++current_iteration_;
            if (current_iteration_ < plan_.iterations.size()) {
                issue_iteration(current_iteration_);
            } else {
                workload_done_ = true;
                engine_.request_stop();
            }
        }
    }
    (void)msg;
}

void Simulation::issue_iteration(std::uint32_t iter) {
    const IterationPlan& it = plan_.iterations[iter];
    engine_.schedule(engine_.now() + it.compute_gap, this, EventKind::kComputePhaseDone, iter);
}

void Simulation::start_workload() {
    if (plan_.iterations.empty() || plan_.iterations.front().messages.empty()) {
        workload_empty_ = true;
        workload_done_ = true;
        return;
    }
    current_iteration_ = 0;
    issue_iteration(0);
}

void Simulation::schedule_next_background() {
    if (!background_ || !background_->enabled()) return;
    auto arrival = background_->next(engine_.now());
    const std::uint64_t packed =
        (static_cast<std::uint64_t>(arrival.src_server) << 32) | arrival.dst_server;
    engine_.schedule(arrival.at, this, EventKind::kBackgroundArrival, arrival.size, packed);
}

void Simulation::apply_drain_rate(double gbps_total) {
    OtnEdgeNode* edge = otn_edge(1);
    std::uint32_t n = 0;
    for (auto& p : edge->ports()) {
        if (p->pool != nullptr) ++n;
    }
    if (n == 0) return;
    for (auto& p : edge->ports()) {
        if (p->pool != nullptr) p->set_rate(gbps_total * 1e9 / n);
    }
}

void Simulation::on_event(const Event& ev) {
    switch (ev.kind) {
        case EventKind::kComputePhaseDone: {
            const IterationPlan& it = plan_.iterations[ev.a];
            iteration_issue_at_ = ev.at;
            iteration_outstanding_ = static_cast<std::uint32_t>(it.messages.size());
            for (const auto& pm : it.messages) {
                const NodeId src = layout_.server(0, pm.src_server);
                const NodeId dst = layout_.server(1, pm.dst_server);
                auto found = pair_conn_.find(pair_key(src, dst));
                ConnId conn = (found != pair_conn_.end())
                                  ? found->second
                                  : open_connection(src, dst, FlowClass::kInterDc);
                submit_message(conn, pm.size, /*barrier_counted=*/true);
            }
            return;
        }
        case EventKind::kBackgroundArrival: {
            const std::uint32_t src_idx = static_cast<std::uint32_t>(ev.b >> 32);
            const std::uint32_t dst_idx = static_cast<std::uint32_t>(ev.b & 0xffffffffu);
            const NodeId src = layout_.server(1, src_idx);
            const NodeId dst = layout_.server(1, dst_idx);
            auto found = pair_conn_.find(pair_key(src, dst));
            ConnId conn = (found != pair_conn_.end())
                              ? found->second
                              : open_connection(src, dst, FlowClass::kIntraDc);
            submit_message(conn, ev.a);
            schedule_next_background();
            return;
        }
        case EventKind::kRateChange:
            apply_drain_rate(cfg_.drain.post_gbps);
            return;
        case EventKind::kWatchdog: {
            const std::uint64_t delivered =
                metrics_.inter_delivered() + metrics_.intra_delivered();
            if (!workload_done_ && completed_messages_ == watchdog_last_completed_ &&
                delivered == watchdog_last_delivered_) {
                throw SimulationError("progress watchdog: no delivery for 10 simulated seconds");
            }
            watchdog_last_completed_ = completed_messages_;
            watchdog_last_delivered_ = delivered;
            engine_.schedule(ev.at + 10 * kSecond, this, EventKind::kWatchdog);
            return;
        }
        case EventKind::kTraceSample:
            buffer_trace_.emplace_back(ev.at, otn_edge(1)->dest_pool().occupancy());
            engine_.schedule(ev.at + 10 * kMicrosecond, this, EventKind::kTraceSample);
            return;
        default:
            return;
    }
}

void Simulation::record_budget_install(SimTime at, std::uint64_t epoch, double rate_bps) {
    if (!budget_trace_.empty() && std::get<1>(budget_trace_.back()) >= epoch &&
        std::get<0>(budget_trace_.back()) == at) {
        return;
    }
    if (!budget_trace_.empty() && std::get<1>(budget_trace_.back()) > epoch) {
        throw SimulationError("installed budget epochs must increase");
    }
    budget_trace_.emplace_back(at, epoch, rate_bps);
}

double Simulation::pause_time_ratio() {
    const SimTime now = engine_.now();
    if (now == 0) return 0.0;
    SimTime paused = 0;
    std::uint64_t ports = 0;
    for (auto& n : nodes_) {
        for (auto& p : n->ports()) {
            if (!p->pfc_enabled()) continue;
            ++ports;
            paused += p->paused_accum(now);
        }
    }
    if (ports == 0) return 0.0;
    return static_cast<double>(paused) / (static_cast<double>(ports) * static_cast<double>(now));
}

std::uint64_t Simulation::queued_packets() const {
    std::uint64_t n = 0;
    for (const auto& node : nodes_) {
        for (const auto& p : node->ports()) n += p->queued_packets();
    }
    const OtnEdgeNode* a = static_cast<const OtnEdgeNode*>(nodes_[layout_.otn_edge(0)].get());
    const OtnEdgeNode* b = static_cast<const OtnEdgeNode*>(nodes_[layout_.otn_edge(1)].get());
    for (const OtnEdgeNode* e : {a, b}) {
        for (const auto& [conn, entry] : e->table()) n += entry.staged.size();
        n += e->retx_queue_size();
    }
    return n;
}

void Simulation::audit_conservation() {
    const std::uint64_t created = metrics_.wire_created();
    const std::uint64_t consumed = metrics_.wire_consumed();
    const std::uint64_t dropped = metrics_.wire_dropped();
    const std::uint64_t residual = queued_packets() + in_flight_packets_;
    if (created != consumed + dropped + residual) {
        throw SimulationError("wire conservation violated: created=" + std::to_string(created) +
                              " consumed=" + std::to_string(consumed) +
                              " dropped=" + std::to_string(dropped) +
                              " residual=" + std::to_string(residual));
    }
    if (engine_.scheduled_count() !=
        engine_.dispatched_count() + engine_.pending_count()) {
        throw SimulationError("event conservation violated");
    }
}

void Simulation::audit_ledgers() {
    for (auto& fp : flows_) {
        Flow& f = *fp;
        // strict in-order delivery: delivered payload must equal the psn
        // prefix the receiver has advanced over
        if (f.snd.end_psn > 0) {
            const std::uint64_t expect =
                f.snd.bytes_between(0, std::min(f.rcv.rcv_nxt, f.snd.end_psn),
                                    cfg_.transport.mtu_payload) -
                std::min(f.rcv.rcv_nxt, f.snd.end_psn) * kRoceHeaderBytes;
            if (expect != f.rcv.delivered_payload) {
                throw SimulationError("delivered ledger mismatch on conn " +
                                      std::to_string(f.id));
            }
        }
        // every completed message's full payload was delivered in order
        for (std::size_t i = 0; i < f.snd.first_active_msg; ++i) {
            const Message& m = f.snd.messages[i];
            if (!m.completed()) throw SimulationError("completion walk skipped a message");
            if (f.rcv.rcv_nxt <= m.last_psn) {
                throw SimulationError("message completed before end-to-end delivery");
            }
        }
        if (f.snd.snd_una > f.snd.snd_nxt) throw SimulationError("snd_una beyond snd_nxt");
        if (f.snd.cc.current_rate_bps <= 0 ||
            f.snd.cc.current_rate_bps > f.snd.cc.line_rate_bps + 1) {
            throw SimulationError("sender rate outside (0, line]");
        }
        if (f.snd.cc.alpha < 0 || f.snd.cc.alpha > 1) {
            throw SimulationError("alpha outside [0, 1]");
        }
    }
}

MetricsRecord Simulation::collect_record() {
    MetricsRecord r;
    r.scenario_id = cfg_.scenario_id();
    r.scheme = to_string(cfg_.scheme);
    r.distance_km = cfg_.topology.distance_km;
    r.msg_size_bytes = cfg_.workload.msg_size;
    r.concurrency = cfg_.workload.concurrency;
    r.duration_ns = engine_.now();
    r.active_ns = metrics_.active_ns();
    const double dur = static_cast<double>(std::max<SimTime>(1, r.duration_ns));
    r.goodput_bps = static_cast<std::uint64_t>(
        static_cast<double>(metrics_.inter_delivered()) * 8e9 / dur);
    r.goodput_active_bps =
        r.active_ns > 0 ? static_cast<std::uint64_t>(static_cast<double>(
                              metrics_.inter_delivered()) * 8e9 /
                          static_cast<double>(r.active_ns))
                        : 0;
    r.inter_goodput_bps = static_cast<double>(r.goodput_bps);
    r.intra_goodput_bps = static_cast<double>(metrics_.intra_delivered()) * 8e9 / dur;
    SharedBufferPool& pool = otn_edge(1)->dest_pool();
    r.peak_buf_bytes = pool.peak();
    r.mean_buf_bytes = static_cast<std::uint64_t>(pool.mean_bytes(engine_.now()));
    r.pause_ratio = pause_time_ratio();

    std::vector<SimTime> all = metrics_.fct_inter();
    all.insert(all.end(), metrics_.fct_intra().begin(), metrics_.fct_intra().end());
    auto mean = [](const std::vector<SimTime>& v) -> SimTime {
        if (v.empty()) return 0;
        long double s = 0;
        for (SimTime x : v) s += static_cast<long double>(x);
        return static_cast<SimTime>(s / static_cast<long double>(v.size()));
    };
    r.fct_mean_ns = mean(all);
    r.fct_p99_ns = percentile_ns(all, 0.99);
    r.fct_mean_inter_ns = mean(metrics_.fct_inter());
    r.fct_p99_inter_ns = percentile_ns(metrics_.fct_inter(), 0.99);
    r.fct_mean_intra_ns = mean(metrics_.fct_intra());
    r.inter_messages = metrics_.fct_inter().size();
    r.intra_messages = metrics_.fct_intra().size();
    r.drops = metrics_.drops();
    r.control_msgs = metrics_.control_msgs();
    r.events = engine_.dispatched_count();
    return r;
}

void Simulation::write_traces() {
    const std::string base = cfg_.trace_dir + "/" + cfg_.scenario_id();
    {
        std::ofstream out(base + ".buffer.csv");
        out << "time_ns,occupancy_B\n";
        for (const auto& [t, occ] : buffer_trace_) out << t << "," << occ << "\n";
    }
    {
        std::ofstream out(base + ".budget.csv");
        out << "time_ns,epoch,rate_bps\n";
        for (const auto& [t, epoch, rate] : budget_trace_) {
            out << t << "," << epoch << "," << static_cast<std::uint64_t>(rate) << "\n";
        }
    }
}

MetricsRecord Simulation::run() {
    const SchemeProfile profile = scheme_profile(cfg_.scheme);
    if (profile.control_channel || profile.dest_estimation) {
        otn_edge(0)->start_control_plane();
        otn_edge(1)->start_control_plane();
    }
    if (cfg_.drain.enabled) {
        if (cfg_.drain.pre_gbps > 0) apply_drain_rate(cfg_.drain.pre_gbps);
        engine_.schedule(cfg_.drain.at, this, EventKind::kRateChange);
    }
    if (cfg_.trace) {
        engine_.schedule(0, this, EventKind::kTraceSample);
    }
    engine_.schedule(10 * kSecond, this, EventKind::kWatchdog);
    start_workload();
    schedule_next_background();

    MetricsRecord r;
    try {
        while (true) {
            engine_.run_until_stopped(cfg_.max_duration);
            if (engine_.stop_requested() || engine_.now() >= cfg_.max_duration) break;
            if (engine_.pending_count() == 0) {
                if (!workload_done_) {
                    throw SimulationError("deadlock: event queue empty with workload pending");
                }
                break;
            }
        }
        if (!workload_done_ && engine_.now() >= cfg_.max_duration &&
            !cfg_.workload.continuous) {
            r.error = "timeout";
        }
        audit_conservation();
        audit_ledgers();
    } catch (const SimulationError& e) {
        r = collect_record();
        r.error = e.what();
        if (cfg_.trace) write_traces();
        throw;
    }
    MetricsRecord out = collect_record();
    out.error = r.error;
    if (cfg_.trace) write_traces();
    return out;
}

}  // namespace matchrdma
