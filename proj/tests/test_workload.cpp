#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "matchrdma/workload.hpp"
#include "matchrdma/event_engine.hpp"

using namespace matchrdma;

TEST_CASE("a degenerate schedule: one message per iteration, three iterations") {
    WorkloadConfig cfg;
    cfg.msg_size = 1024 * 1024;
    cfg.concurrency = 1;
    cfg.iterations = 3;
    cfg.jitter_pct = 0.0;
    WorkloadPlan plan = generate_schedule(cfg, 8, 8, 1);
    REQUIRE(plan.iterations.size() == 3);
    for (const auto& it : plan.iterations) {
        CHECK(it.messages.size() == 1);
        CHECK(it.messages[0].size == cfg.msg_size);
        CHECK(it.compute_gap == cfg.compute_time);
    }
}

TEST_CASE("concurrency 64 issues 64 messages per iteration") {
    WorkloadConfig cfg;
    cfg.concurrency = 64;
    cfg.iterations = 2;
    WorkloadPlan plan = generate_schedule(cfg, 8, 8, 1);
    for (const auto& it : plan.iterations) CHECK(it.messages.size() == 64);
}

TEST_CASE("round-robin assignment on both sides") {
    WorkloadConfig cfg;
    cfg.concurrency = 16;
    cfg.iterations = 1;
    WorkloadPlan plan = generate_schedule(cfg, 8, 8, 1);
    const auto& msgs = plan.iterations[0].messages;
    for (std::uint32_t j = 0; j < 16; ++j) {
        CHECK(msgs[j].src_server == j % 8);
        CHECK(msgs[j].dst_server == j % 8);
    }
}

TEST_CASE("uniform jitter: sizes within +-10 percent, mean within 1 percent") {
    WorkloadConfig cfg;
    cfg.msg_size = 1024 * 1024;
    cfg.concurrency = 50;
    cfg.iterations = 200;  // 10^4 draws
    cfg.jitter_pct = 10.0;
    WorkloadPlan plan = generate_schedule(cfg, 8, 8, 42);
    double sum = 0;
    std::uint64_t n = 0;
    for (const auto& it : plan.iterations) {
        for (const auto& m : it.messages) {
            CHECK(m.size >= cfg.msg_size * 0.9 - 1);
            CHECK(m.size <= cfg.msg_size * 1.1 + 1);
            sum += static_cast<double>(m.size);
            ++n;
        }
    }
    CHECK(sum / static_cast<double>(n) ==
          doctest::Approx(static_cast<double>(cfg.msg_size)).epsilon(0.01));
}

TEST_CASE("schedules are deterministic under a fixed seed") {
    WorkloadConfig cfg;
    cfg.concurrency = 8;
    cfg.iterations = 20;
    cfg.jitter_pct = 25.0;
    WorkloadPlan a = generate_schedule(cfg, 8, 8, 7);
    WorkloadPlan b = generate_schedule(cfg, 8, 8, 7);
    REQUIRE(a.iterations.size() == b.iterations.size());
    for (std::size_t i = 0; i < a.iterations.size(); ++i) {
        CHECK(a.iterations[i].compute_gap == b.iterations[i].compute_gap);
        for (std::size_t j = 0; j < a.iterations[i].messages.size(); ++j) {
            CHECK(a.iterations[i].messages[j].size == b.iterations[i].messages[j].size);
        }
    }
    WorkloadPlan c = generate_schedule(cfg, 8, 8, 8);
    bool differs = false;
    for (std::size_t i = 0; i < a.iterations.size() && !differs; ++i) {
        differs = a.iterations[i].compute_gap != c.iterations[i].compute_gap;
    }
    CHECK(differs);
}

TEST_CASE("zero-size or zero-count workloads are rejected") {
    WorkloadConfig cfg;
    cfg.msg_size = 0;
    CHECK_THROWS_AS(generate_schedule(cfg, 8, 8, 1), SimulationError);
    cfg.msg_size = 1024;
    cfg.concurrency = 0;
    CHECK_THROWS_AS(generate_schedule(cfg, 8, 8, 1), SimulationError);
}

TEST_CASE("background generator: zero load disables the stream") {
    WorkloadConfig cfg;
    cfg.intra_dc_load = 0.0;
    BackgroundGenerator gen(cfg, 8, 800e9, 1);
    CHECK_FALSE(gen.enabled());
}

TEST_CASE("background offered load matches the requested fraction within 5 percent") {
    // load 0.5 on a single 100 Gbps edge: 50 Gbps offered
    WorkloadConfig cfg;
    cfg.intra_dc_load = 0.5;
    BackgroundGenerator gen(cfg, 2, 100e9, 3);
    REQUIRE(gen.enabled());
    const SimTime horizon = 100 * kMillisecond;
    SimTime t = 0;
    double bytes = 0;
    while (true) {
        auto a = gen.next(t);
        if (a.at >= horizon) break;
        t = a.at;
        bytes += static_cast<double>(a.size);
        CHECK(a.src_server != a.dst_server);
    }
    const double offered_bps = bytes * 8.0 / (static_cast<double>(horizon) * 1e-9);
    CHECK(offered_bps == doctest::Approx(0.5 * 100e9).epsilon(0.05));
}

TEST_CASE("background sizes are log-uniform with a 64 KB median") {
    WorkloadConfig cfg;
    cfg.intra_dc_load = 0.4;
    BackgroundGenerator gen(cfg, 4, 400e9, 11);
    std::vector<std::uint64_t> sizes;
    SimTime t = 0;
    for (int i = 0; i < 20001; ++i) {
        auto a = gen.next(t);
        t = a.at;
        sizes.push_back(a.size);
        CHECK(a.size >= cfg.bg_min_size);
        CHECK(a.size <= cfg.bg_max_size + 1);
    }
    std::nth_element(sizes.begin(), sizes.begin() + sizes.size() / 2, sizes.end());
    const double median = static_cast<double>(sizes[sizes.size() / 2]);
    CHECK(median == doctest::Approx(65536.0).epsilon(0.05));
}

TEST_CASE("background streams are deterministic per seed") {
    WorkloadConfig cfg;
    cfg.intra_dc_load = 0.3;
    BackgroundGenerator a(cfg, 8, 800e9, 5);
    BackgroundGenerator b(cfg, 8, 800e9, 5);
    SimTime ta = 0, tb = 0;
    for (int i = 0; i < 1000; ++i) {
        auto xa = a.next(ta);
        auto xb = b.next(tb);
        CHECK(xa.at == xb.at);
        CHECK(xa.size == xb.size);
        CHECK(xa.src_server == xb.src_server);
        CHECK(xa.dst_server == xb.dst_server);
        ta = xa.at;
        tb = xb.at;
    }
}
