#pragma once

#include <cstdint>

#include "matchrdma/sim_time.hpp"

namespace matchrdma {

using NodeId = std::uint16_t;
using ConnId = std::uint32_t;

constexpr std::uint32_t kRoceHeaderBytes = 48;

enum class PacketKind : std::uint8_t {
    kData,
    kAck,
    kNack,
    kCnp,
    kPseudoAck,
    kControl,  // connection setup / message-completion records
};

enum class EcnBits : std::uint8_t { kNotEct, kEct, kCe };

enum class ControlOp : std::uint8_t { kNone, kConnSetup, kCompletionRecord };

// The simulated wire unit. Payload is accounted by size only; no data bytes
// are carried. ACK/NACK/CNP/PSEUDO_ACK/CONTROL are header-only (48 B).
struct RocePacket {
    ConnId conn_id = 0;
    std::uint32_t psn = 0;       // cumulative on ACK/NACK: all DATA psn' < psn received
    PacketKind kind = PacketKind::kData;
    EcnBits ecn = EcnBits::kNotEct;
    ControlOp control_op = ControlOp::kNone;
    std::uint8_t forward = 1;    // 1: src->dst direction, 0: reverse
    std::uint8_t hop = 0;        // index into the connection's static path
    std::uint8_t msg_last = 0;   // final DATA packet of its message
    std::uint8_t relay_retx = 0; // resent from the source-OTN relay buffer
    std::uint32_t payload = 0;   // bytes of payload (0 for header-only kinds)
    std::uint32_t msg_id = 0;
    NodeId src = 0;
    NodeId dst = 0;
    NodeId ingress_node = 0xffff;  // neighbor that delivered this packet here

    std::uint32_t size() const { return kRoceHeaderBytes + payload; }
    bool header_only() const { return kind != PacketKind::kData; }
};

const char* to_string(PacketKind kind);

}  // namespace matchrdma
