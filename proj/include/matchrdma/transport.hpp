#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "matchrdma/dcqcn.hpp"
#include "matchrdma/node.hpp"
#include "matchrdma/packet.hpp"
#include "matchrdma/sim_time.hpp"

namespace matchrdma {

enum class FlowClass : std::uint8_t { kInterDc, kIntraDc };

struct Message {
    std::uint32_t msg_id = 0;
    std::uint64_t size = 0;
    SimTime created_at = 0;
    SimTime completed_at = -1;
    FlowClass flow_class = FlowClass::kInterDc;
    bool barrier_counted = false;  // issued by the iteration workload driver
    // psn range [first_psn, last_psn] assigned at submission
    std::uint64_t first_psn = 0;
    std::uint64_t last_psn = 0;

    bool completed() const { return completed_at >= 0; }
};

struct TransportConfig {
    std::uint32_t mtu_payload = 4096;
    std::uint64_t window_cap = 1024 * 1024;
    std::uint32_t ack_coalesce = 1;
    SimTime cnp_min_interval = 50 * kMicrosecond;
    SimTime nack_repeat_interval = 200 * kMicrosecond;
    SimTime min_rto = 1 * kMillisecond;
    double rto_multiplier = 3.0;
    double themis_ratio_cap = 32.0;  // cap on the RTT-proportional rescaling
    DcqcnConfig dcqcn;
};

// Number of MTU-sized segments a message occupies (last one carries the
// remainder).
std::uint64_t segment_count(std::uint64_t msg_size, std::uint32_t mtu_payload);

// Payload size of segment `index` within a message.
std::uint32_t segment_payload(std::uint64_t msg_size, std::uint32_t mtu_payload,
                              std::uint64_t index);

// Sender side of one queue pair: segmentation, rate-paced emission under a
// byte window, go-back-N retransmission and DCQCN rate control.
struct SenderQp {
    ConnId conn = 0;
    FlowClass flow_class = FlowClass::kInterDc;

    std::uint64_t snd_nxt = 0;
    std::uint64_t snd_una = 0;
    std::uint64_t max_sent_psn = 0;  // one past the highest psn ever emitted
    std::uint64_t inflight_bytes = 0;
    std::uint64_t window_cap = 0;
    std::uint64_t end_psn = 0;  // one past the last planned psn

    std::vector<Message> messages;  // contiguous psn ranges, oldest first
    std::size_t first_active_msg = 0;

    DcqcnState cc;
    double pace_next_ns = 0.0;
    bool pacer_scheduled = false;
    std::uint64_t timer_generation = 0;
    bool cc_timers_running = false;

    SimTime last_progress_at = 0;
    SimTime rto_deadline = 0;
    bool rto_armed = false;
    SimTime srtt = 0;
    std::uint64_t sample_psn = 0;  // one outstanding RTT sample (Karn's rule)
    SimTime sample_sent_at = 0;
    bool sample_pending = false;

    std::uint64_t proxy_cnp_count = 0;

    // Maps a psn to its packet payload by walking the owning message.
    std::uint32_t payload_of(std::uint64_t psn, std::uint32_t mtu_payload) const;
    const Message* message_of(std::uint64_t psn) const;
    std::uint64_t bytes_between(std::uint64_t from_psn, std::uint64_t to_psn,
                                std::uint32_t mtu_payload) const;
    bool has_unsent() const { return snd_nxt < end_psn; }
};

// Receiver side: strict in-order acceptance (go-back-N), cumulative ACKs,
// NACK on gaps, CNP echo for CE marks.
struct ReceiverQp {
    ConnId conn = 0;
    std::uint64_t rcv_nxt = 0;
    std::uint32_t since_ack = 0;
    std::uint64_t last_nack_psn = ~0ULL;
    SimTime last_nack_at = -(1LL << 60);
    SimTime last_cnp_at = -(1LL << 60);
    std::uint64_t delivered_payload = 0;
};

}  // namespace matchrdma
