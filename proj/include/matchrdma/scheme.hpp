#pragma once

#include <cstdint>
#include <string>

namespace matchrdma {

enum class SchemeId : std::uint8_t { kDcqcnLike, kPseudoAck, kThemisLike, kMatchRdma };

// Feature switches the OTN edges and senders consult. Switching scheme
// changes nothing else: topology, workload and seed streams stay identical.
struct SchemeProfile {
    bool track_connections = false;  // connection table at the source OTN
    bool pseudo_ack = false;         // relay ACKs + retransmission ownership
    bool budget_gate = false;        // token-bucket admission at the source
    bool control_channel = false;    // delay probes + budget signaling
    bool dest_estimation = false;    // slot observation and budget updates
    bool cc_proxy = false;           // staging/CE-driven proxy CNPs
    bool absorb_cnp = false;         // CNPs from the receiving DC stop at the dest OTN
    bool clear_ce_at_source = false; // source loop consumes sending-DC marks
    bool themis_scaling = false;     // RTT-proportional DCQCN re-parameterization
};

SchemeProfile scheme_profile(SchemeId id);
const char* to_string(SchemeId id);
bool scheme_from_string(const std::string& s, SchemeId& out);

}  // namespace matchrdma
