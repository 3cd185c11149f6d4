#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <deque>

#include "matchrdma/rate_estimator.hpp"

using namespace matchrdma;

namespace {

EstimatorConfig base_cfg() {
    EstimatorConfig cfg;
    cfg.slot_len = 100 * kMicrosecond;
    cfg.theta_ack = 24 * kMicrosecond;
    cfg.theta_cnp_per_ms = 10.0;
    cfg.min_stable_window = 8;
    cfg.cv_epsilon = 0.1;
    return cfg;
}

SlotObservation slot_with_rate(double gbps, CongestionLevel lvl = CongestionLevel::kLow) {
    SlotObservation s;
    s.slot_len = 100 * kMicrosecond;
    s.delivered_bytes =
        static_cast<std::uint64_t>(gbps * 1e9 * static_cast<double>(s.slot_len) / 8e9);
    s.level = lvl;
    return s;
}

std::deque<SlotObservation> slots_of(const std::vector<double>& gbps) {
    std::deque<SlotObservation> h;
    for (double g : gbps) h.push_back(slot_with_rate(g));
    return h;
}

}  // namespace

TEST_CASE("classification follows the threshold rules") {
    EstimatorConfig cfg = base_cfg();
    SlotObservation s;
    s.slot_len = cfg.slot_len;

    SUBCASE("quiet slot with fast ACK return is LOW") {
        s.delivered_bytes = 1000;
        s.ack_return_count = 4;
        s.ack_return_sum = 4 * (cfg.theta_ack / 4);
        s.cnp_count = 0;
        CHECK(classify_slot(s, cfg) == CongestionLevel::kLow);
    }
    SUBCASE("CNP frequency at twice the threshold is HIGH") {
        s.delivered_bytes = 1000;
        // 2 * theta per ms over a 0.1 ms slot
        s.cnp_count = static_cast<std::uint64_t>(2.0 * cfg.theta_cnp_per_ms * 0.1);
        CHECK(classify_slot(s, cfg) == CongestionLevel::kHigh);
    }
    SUBCASE("slow-ish ACKs with one CNP is MED") {
        s.delivered_bytes = 1000;
        s.ack_return_count = 10;
        s.ack_return_sum = static_cast<SimTime>(10 * 0.8 * static_cast<double>(cfg.theta_ack));
        s.cnp_count = 1;
        CHECK(classify_slot(s, cfg) == CongestionLevel::kMed);
    }
    SUBCASE("mean ACK return above theta is HIGH") {
        s.delivered_bytes = 1000;
        s.ack_return_count = 5;
        s.ack_return_sum = 5 * (cfg.theta_ack + 1000);
        CHECK(classify_slot(s, cfg) == CongestionLevel::kHigh);
    }
    SUBCASE("idle slot is LOW") {
        CHECK(classify_slot(s, cfg) == CongestionLevel::kLow);
    }
}

TEST_CASE("constant-rate history forms one stable window") {
    EstimatorConfig cfg = base_cfg();
    auto h = slots_of(std::vector<double>(32, 50.0));
    auto runs = detect_stable_windows(h, cfg);
    REQUIRE(runs.size() == 1);
    CHECK(runs[0].stable);
    CHECK(runs[0].first == 0);
    CHECK(runs[0].count == 32);
}

TEST_CASE("alternating idle/line-rate slots are all jitter under W=4") {
    EstimatorConfig cfg = base_cfg();
    cfg.min_stable_window = 4;
    std::vector<double> pattern;
    for (int i = 0; i < 16; ++i) pattern.push_back(i % 2 == 0 ? 0.0 : 100.0);
    auto runs = detect_stable_windows(slots_of(pattern), cfg);
    for (const auto& r : runs) CHECK_FALSE(r.stable);
    std::size_t covered = 0;
    for (const auto& r : runs) covered += r.count;
    CHECK(covered == 16);
}

TEST_CASE("two spike slots split an otherwise constant history") {
    // 10 constant + 2 spikes + 10 constant with W=4: exactly two stable
    // windows and 2 jitter slots (brute-force derivation of the greedy
    // partition over the 22-slot sequence).
    EstimatorConfig cfg = base_cfg();
    cfg.min_stable_window = 4;
    std::vector<double> pattern(10, 60.0);
    pattern.push_back(5.0);
    pattern.push_back(95.0);
    for (int i = 0; i < 10; ++i) pattern.push_back(60.0);
    auto runs = detect_stable_windows(slots_of(pattern), cfg);

    REQUIRE(runs.size() == 3);
    CHECK(runs[0].stable);
    CHECK(runs[0].first == 0);
    CHECK(runs[0].count == 10);
    CHECK_FALSE(runs[1].stable);
    CHECK(runs[1].first == 10);
    CHECK(runs[1].count == 2);
    CHECK(runs[2].stable);
    CHECK(runs[2].first == 12);
    CHECK(runs[2].count == 10);
}

TEST_CASE("partition covers the history exactly") {
    EstimatorConfig cfg = base_cfg();
    cfg.min_stable_window = 4;
    std::vector<double> pattern;
    for (int i = 0; i < 40; ++i) pattern.push_back((i * 977) % 13 < 6 ? 40.0 : 40.0 + (i % 7));
    auto runs = detect_stable_windows(slots_of(pattern), cfg);
    std::size_t at = 0;
    for (const auto& r : runs) {
        CHECK(r.first == at);
        at += r.count;
    }
    CHECK(at == 40);
}

TEST_CASE("nearest-rank p25") {
    CHECK(percentile_nearest_rank({10.0, 40.0}, 0.25) == 10.0);
    CHECK(percentile_nearest_rank({1, 2, 3, 4}, 0.25) == 1.0);
    CHECK(percentile_nearest_rank({5}, 0.25) == 5.0);
    CHECK(percentile_nearest_rank({}, 0.25) == 0.0);
}

TEST_CASE("coefficient of variation handles degenerate inputs") {
    const double equal[4] = {7, 7, 7, 7};
    CHECK(coefficient_of_variation(equal, 4) == 0.0);
    const double zeros[3] = {0, 0, 0};
    CHECK(coefficient_of_variation(zeros, 3) == 0.0);
    const double alt[2] = {0, 100};
    CHECK(coefficient_of_variation(alt, 2) == doctest::Approx(1.0));
}

TEST_CASE("weighted budget: all slots stable at 50 Gbps with unit headroom") {
    EstimatorConfig cfg = base_cfg();
    cfg.headroom = 1.0;
    auto h = slots_of(std::vector<double>(16, 50.0));
    auto part = detect_stable_windows(h, cfg);
    EstimateInputs in;
    in.current_level = CongestionLevel::kLow;
    in.last_sent_bps = 0.0;  // no probe term
    RateBudget prev;
    prev.epoch = 4;
    RateBudget b = estimate_rate_budget(h, part, in, prev, cfg);
    CHECK(b.rate_bps == doctest::Approx(50e9).epsilon(1e-9));
    CHECK(b.epoch == 5);
}

TEST_CASE("weighted budget: hand-evaluable stable/jitter mix") {
    // 8 stable slots at 80 Gbps, 2 jitter slots at {10, 40} Gbps,
    // w_s=4, w_j=1, headroom 1.0: (4*8*80 + 1*2*p25) / (4*8 + 1*2) with
    // p25({10,40}) = 10 under nearest-rank = 2580/34 = 75.882 Gbps.
    EstimatorConfig cfg = base_cfg();
    cfg.headroom = 1.0;
    cfg.weight_stable = 4.0;
    cfg.weight_jitter = 1.0;
    auto h = slots_of({80, 80, 80, 80, 80, 80, 80, 80, 10, 40});
    std::vector<SlotRun> part{{0, 8, true}, {8, 2, false}};
    EstimateInputs in;
    in.current_level = CongestionLevel::kMed;
    RateBudget b = estimate_rate_budget(h, part, in, RateBudget{}, cfg);
    CHECK(b.rate_bps == doctest::Approx(2580.0 / 34.0 * 1e9).epsilon(1e-9));
}

TEST_CASE("empty history collapses to the rate floor") {
    EstimatorConfig cfg = base_cfg();
    std::deque<SlotObservation> h;
    RateBudget b = estimate_rate_budget(h, {}, EstimateInputs{}, RateBudget{}, cfg);
    CHECK(b.rate_bps == cfg.rate_floor_bps);
    CHECK(b.epoch == 1);
}

TEST_CASE("HIGH level tightens by beta") {
    EstimatorConfig cfg = base_cfg();
    cfg.headroom = 1.0;
    cfg.beta = 0.5;
    auto h = slots_of(std::vector<double>(16, 80.0));
    auto part = detect_stable_windows(h, cfg);
    EstimateInputs in;
    in.current_level = CongestionLevel::kHigh;
    RateBudget b = estimate_rate_budget(h, part, in, RateBudget{}, cfg);
    CHECK(b.rate_bps == doctest::Approx(40e9).epsilon(1e-9));
}

TEST_CASE("probe growth lifts a gate-limited quiet estimate") {
    EstimatorConfig cfg = base_cfg();
    auto h = slots_of(std::vector<double>(16, 10.0));
    auto part = detect_stable_windows(h, cfg);
    EstimateInputs in;
    in.current_level = CongestionLevel::kLow;
    in.last_sent_bps = 10e9;  // delivered == enforced: gate-limited
    in.recent_delivered_bps = 10e9;
    in.congestion_seen = true;
    in.periods_since_tighten = 10;
    RateBudget b = estimate_rate_budget(h, part, in, RateBudget{}, cfg);
    CHECK(b.rate_bps == doctest::Approx(10e9 * cfg.probe_growth).epsilon(1e-6));

    in.periods_since_tighten = 0;  // hold right after a tighten
    RateBudget held = estimate_rate_budget(h, part, in, RateBudget{}, cfg);
    CHECK(held.rate_bps == doctest::Approx(10e9 * cfg.headroom).epsilon(1e-6));
}

TEST_CASE("budget rate stays inside [floor, capacity]") {
    EstimatorConfig cfg = base_cfg();
    auto low = slots_of(std::vector<double>(16, 0.001));
    auto part = detect_stable_windows(low, cfg);
    RateBudget b = estimate_rate_budget(low, part, EstimateInputs{}, RateBudget{}, cfg);
    CHECK(b.rate_bps >= cfg.rate_floor_bps);

    auto high = slots_of(std::vector<double>(16, 1e5));
    part = detect_stable_windows(high, cfg);
    b = estimate_rate_budget(high, part, EstimateInputs{}, RateBudget{}, cfg);
    CHECK(b.rate_bps <= cfg.capacity_bps);
}
