#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "matchrdma/simulation.hpp"

using namespace matchrdma;

namespace {

ScenarioConfig small_cfg() {
    ScenarioConfig cfg;
    cfg.scheme = SchemeId::kDcqcnLike;
    cfg.topology.leaves = 2;
    cfg.topology.spines = 2;
    cfg.topology.servers_per_leaf = 4;
    cfg.topology.otn_parallel_links = 4;
    cfg.topology.distance_km = 1;
    cfg.workload.iterations = 0;
    return cfg;
}

// Registers a connection and pre-seeds its sender psn space so hand-crafted
// packets (and the ACKs they trigger) stay protocol-consistent.
ConnId poke_conn(Simulation& sim, NodeId src, NodeId dst, std::uint64_t psns = 100000) {
    const ConnId id = sim.open_connection(src, dst, FlowClass::kIntraDc);
    Flow& f = sim.flow(id);
    Message m;
    m.msg_id = 0;
    m.size = psns * 4096;
    m.first_psn = 0;
    m.last_psn = psns - 1;
    f.snd.messages.push_back(m);
    f.snd.end_psn = psns;
    f.snd.snd_nxt = psns;
    f.snd.max_sent_psn = psns;  // "already sent": ACKs for any crafted psn are valid
    return id;
}

RocePacket data_packet(Flow& f, std::uint64_t psn, std::uint32_t payload, std::uint8_t hop) {
    RocePacket pkt;
    pkt.conn_id = f.id;
    pkt.psn = static_cast<std::uint32_t>(psn);
    pkt.kind = PacketKind::kData;
    pkt.ecn = EcnBits::kEct;
    pkt.forward = 1;
    pkt.hop = hop;
    pkt.payload = payload;
    pkt.msg_id = 0;
    pkt.src = f.src;
    pkt.dst = f.dst;
    return pkt;
}

}  // namespace

TEST_CASE("topology distances follow 5 us/km") {
    for (auto [km, expect] : std::vector<std::pair<std::uint32_t, SimTime>>{
             {1000, from_ms(5)}, {1, from_us(5)}, {100, from_us(500)}}) {
        ScenarioConfig cfg = small_cfg();
        cfg.topology.distance_km = km;
        Simulation sim(cfg);
        Node* otn = sim.node(sim.layout().otn_edge(0));
        bool found = false;
        for (auto& p : otn->ports()) {
            if (sim.node(p->peer())->kind() == NodeKind::kOtnEdge) {
                CHECK(p->prop_ns() == expect);
                found = true;
            }
        }
        CHECK(found);
    }
}

TEST_CASE("topology validation rejects bad counts") {
    ScenarioConfig cfg = small_cfg();
    cfg.topology.leaves = 0;
    CHECK_THROWS_AS(Simulation{cfg}, SimulationError);
    cfg = small_cfg();
    cfg.topology.distance_km = 2000;
    CHECK_THROWS_AS(Simulation{cfg}, SimulationError);
}

TEST_CASE("exactly two OTN edge nodes joined by the parallel links") {
    ScenarioConfig cfg = small_cfg();
    Simulation sim(cfg);
    std::uint32_t edges = 0, cross_links = 0;
    for (std::uint32_t id = 0; id < sim.layout().total_nodes(); ++id) {
        if (sim.node(static_cast<NodeId>(id))->kind() == NodeKind::kOtnEdge) ++edges;
    }
    Node* a = sim.node(sim.layout().otn_edge(0));
    for (auto& p : a->ports()) {
        if (sim.node(p->peer())->kind() == NodeKind::kOtnEdge) ++cross_links;
    }
    CHECK(edges == 2);
    CHECK(cross_links == cfg.topology.otn_parallel_links);
}

TEST_CASE("serialization: 4096 B packet on a 100 Gbps link") {
    CHECK(serialization_ns(4096, 100e9) == doctest::Approx(327.68));
    // event-level: per-port picosecond carry keeps the average exact
    ScenarioConfig cfg = small_cfg();
    Simulation sim(cfg);
    const NodeId s0 = sim.layout().server(0, 0);
    const NodeId s1 = sim.layout().server(0, 1);
    ConnId id = poke_conn(sim, s0, s1);
    Flow& f = sim.flow(id);
    sim.engine().run_until(10 * kMicrosecond);  // let the setup packet land

    const SimTime t0 = sim.engine().now();
    for (int i = 0; i < 10; ++i) {
        sim.metrics().on_wire_enqueue();
        // payload chosen so the wire size is exactly 4096 B
        f.fwd[0]->enqueue(data_packet(f, i, 4096 - kRoceHeaderBytes, 1), t0);
    }
    // 10 packets serialized back to back: 3276.8 ns after t0 (+-1 ns carry)
    sim.engine().run_until(t0 + 3275);
    CHECK(f.fwd[0]->queued_packets() >= 1);
    sim.engine().run_until(t0 + 3278);
    CHECK(f.fwd[0]->queued_packets() == 0);
}

TEST_CASE("full data queue drops, control class never does") {
    ScenarioConfig cfg = small_cfg();
    Simulation sim(cfg);
    ConnId id = poke_conn(sim, sim.layout().server(0, 0), sim.layout().server(0, 1));
    Flow& f = sim.flow(id);
    Port* p = f.fwd[0];
    p->data_capacity = 2 * 4144;
    p->pfc_pause(0);  // block the transmitter so occupancy accumulates

    CHECK(p->enqueue(data_packet(f, 0, 4096, 1), 0) == EnqueueResult::kAccepted);
    CHECK(p->enqueue(data_packet(f, 1, 4096, 1), 0) == EnqueueResult::kAccepted);
    CHECK(p->enqueue(data_packet(f, 2, 4096, 1), 0) == EnqueueResult::kDropped);
    CHECK(p->drops() == 1);

    RocePacket ack;
    ack.conn_id = id;
    ack.kind = PacketKind::kAck;
    ack.forward = 0;
    ack.hop = 1;
    ack.src = f.src;
    ack.dst = f.dst;
    CHECK(p->enqueue(ack, 0) == EnqueueResult::kAccepted);
}

TEST_CASE("paused port holds data until resume") {
    ScenarioConfig cfg = small_cfg();
    Simulation sim(cfg);
    ConnId id = poke_conn(sim, sim.layout().server(0, 0), sim.layout().server(0, 1));
    Flow& f = sim.flow(id);
    sim.engine().run_until(10 * kMicrosecond);
    Port* p = f.fwd[0];
    p->pfc_pause(sim.engine().now());

    for (int i = 0; i < 4; ++i) {
        sim.metrics().on_wire_enqueue();
        p->enqueue(data_packet(f, i, 4096, 1), sim.engine().now());
    }
    sim.engine().run_until(sim.engine().now() + 1 * kMillisecond);
    CHECK(f.rcv.rcv_nxt == 0);  // nothing crossed the fabric
    CHECK(p->data_occupancy() == 4 * 4144);
    CHECK(p->paused_accum(sim.engine().now()) == 1 * kMillisecond);

    p->pfc_resume(sim.engine().now());
    sim.engine().run_until(sim.engine().now() + 1 * kMillisecond);
    CHECK(f.rcv.rcv_nxt == 4);
    CHECK(p->data_occupancy() == 0);
}

TEST_CASE("ECN marking: below kmin never, above kmax always, linear between") {
    ScenarioConfig cfg = small_cfg();
    Simulation sim(cfg);
    ConnId id = poke_conn(sim, sim.layout().server(0, 0), sim.layout().server(0, 1));
    Flow& f = sim.flow(id);
    Port* p = f.fwd[0];
    p->ecn.enabled = true;
    p->ecn.kmin = 100 * 1024;
    p->ecn.kmax = 400 * 1024;
    p->ecn.pmax = 1.0;
    p->data_capacity = 16 * 1024 * 1024;
    p->pfc_pause(0);

    SUBCASE("occupancy below kmin: no marks") {
        while (p->data_occupancy() + 4144 < 90 * 1024) p->enqueue(data_packet(f, 0, 4096, 1), 0);
        for (int i = 0; i < 1000; ++i) CHECK_FALSE(p->ecn_decide());
    }
    SUBCASE("occupancy at kmax: always marks") {
        while (p->data_occupancy() < 400 * 1024) p->enqueue(data_packet(f, 0, 4096, 1), 0);
        for (int i = 0; i < 1000; ++i) CHECK(p->ecn_decide());
    }
    SUBCASE("midpoint occupancy marks with empirical frequency 0.5 +- 0.02") {
        while (p->data_occupancy() + 4144 <= 250 * 1024) {
            p->enqueue(data_packet(f, 0, 4096, 1), 0);
        }
        const double occ = static_cast<double>(p->data_occupancy());
        const double expect = (occ - 100.0 * 1024) / (300.0 * 1024);
        int marks = 0;
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) marks += p->ecn_decide() ? 1 : 0;
        CHECK(static_cast<double>(marks) / draws == doctest::Approx(expect).epsilon(0.04));
        CHECK(expect == doctest::Approx(0.5).epsilon(0.02));
    }
}

TEST_CASE("PFC watermarks: edge-triggered pause and resume, strict alternation") {
    ScenarioConfig cfg = small_cfg();
    Simulation sim(cfg);
    ConnId id = poke_conn(sim, sim.layout().server(0, 0), sim.layout().server(0, 1));
    Flow& f = sim.flow(id);
    sim.engine().run_until(10 * kMicrosecond);

    // congest the leaf's egress toward the destination server; the leaf must
    // pause exactly the contributing upstream (the source server)
    Port* leaf_out = f.fwd[1];
    leaf_out->pfc.enabled = true;
    leaf_out->pfc.xoff = 64 * 1024;
    leaf_out->pfc.xon = 32 * 1024;
    leaf_out->data_capacity = 16 * 1024 * 1024;
    Port* server_nic = f.fwd[0];

    leaf_out->pfc_pause(sim.engine().now());  // hold the transmitter
    int sent = 0;
    auto inject = [&] {
        RocePacket pkt = data_packet(f, sent++, 4096, 2);
        pkt.ingress_node = f.src;  // arrived at the leaf from the source server
        sim.metrics().on_wire_enqueue();
        leaf_out->enqueue(pkt, sim.engine().now());
    };
    while (leaf_out->data_occupancy() <= leaf_out->pfc.xoff) inject();
    for (int i = 0; i < 4; ++i) inject();  // edge trigger: no re-emission
    sim.engine().run_until(sim.engine().now() + 10 * kMicrosecond);
    CHECK(server_nic->pause_frames_rx() == 1);
    CHECK(server_nic->paused());

    leaf_out->pfc_resume(sim.engine().now());  // let it drain below xon
    sim.engine().run_until(sim.engine().now() + 1 * kMillisecond);
    CHECK(server_nic->resume_frames_rx() == 1);
    CHECK_FALSE(server_nic->paused());
    CHECK(f.rcv.rcv_nxt == static_cast<std::uint64_t>(sent));
}

TEST_CASE("oscillation strictly inside the hysteresis band emits nothing") {
    ScenarioConfig cfg = small_cfg();
    Simulation sim(cfg);
    ConnId id = poke_conn(sim, sim.layout().server(0, 0), sim.layout().server(0, 1));
    Flow& f = sim.flow(id);
    Port* leaf_out = f.fwd[1];
    leaf_out->pfc.enabled = true;
    leaf_out->pfc.xoff = 512 * 1024;
    leaf_out->pfc.xon = 256 * 1024;
    leaf_out->data_capacity = 16 * 1024 * 1024;
    Port* server_nic = f.fwd[0];
    leaf_out->pfc_pause(0);

    int psn = 0;
    for (int round = 0; round < 3; ++round) {
        while (leaf_out->data_occupancy() + 4144 <= 500 * 1024) {
            RocePacket pkt = data_packet(f, psn++, 4096, 2);
            pkt.ingress_node = f.src;
            sim.metrics().on_wire_enqueue();
            leaf_out->enqueue(pkt, sim.engine().now());
        }
        leaf_out->pfc_resume(sim.engine().now());
        while (leaf_out->data_occupancy() > 300 * 1024) {
            sim.engine().run_until(sim.engine().now() + 10 * kMicrosecond);
        }
        leaf_out->pfc_pause(sim.engine().now());
    }
    sim.engine().run_until(sim.engine().now() + 100 * kMicrosecond);
    CHECK(server_nic->pause_frames_rx() == 0);
    CHECK(server_nic->resume_frames_rx() == 0);
}

TEST_CASE("shared buffer pool bounds occupancy and tracks the exact peak") {
    SharedBufferPool pool(10000);
    CHECK(pool.try_charge(6000, 0));
    CHECK(pool.try_charge(4000, 10));
    CHECK_FALSE(pool.try_charge(1, 20));
    CHECK(pool.peak() == 10000);
    pool.release(4000, 30);
    CHECK(pool.try_charge(1000, 40));
    CHECK(pool.peak() == 10000);
    CHECK(pool.occupancy() == 7000);
}

TEST_CASE("queue occupancy never exceeds capacity under random churn") {
    ScenarioConfig cfg = small_cfg();
    Simulation sim(cfg);
    ConnId id = poke_conn(sim, sim.layout().server(0, 0), sim.layout().server(0, 1));
    Flow& f = sim.flow(id);
    Port* p = f.fwd[0];
    p->data_capacity = 64 * 1024;
    Rng rng(7, 9);
    int psn = 0;
    for (int step = 0; step < 2000; ++step) {
        if (rng.next_double() < 0.7) {
            sim.metrics().on_wire_enqueue();
            if (p->enqueue(data_packet(f, psn, 1 + static_cast<std::uint32_t>(
                                                      rng.uniform_u64(4096)), 1),
                           sim.engine().now()) == EnqueueResult::kAccepted) {
                ++psn;
            } else {
                sim.metrics().on_wire_dropped(1);
            }
        } else {
            sim.engine().run_until(sim.engine().now() + static_cast<SimTime>(
                                                            rng.uniform_u64(2000)));
        }
        CHECK(p->data_occupancy() <= p->data_capacity);
    }
}
