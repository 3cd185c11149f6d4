#include "matchrdma/scheme.hpp"

namespace matchrdma {

SchemeProfile scheme_profile(SchemeId id) {
    SchemeProfile p;
    switch (id) {
        case SchemeId::kDcqcnLike:
            // passive pipes, end-to-end loops only
            break;
        case SchemeId::kPseudoAck:
            p.track_connections = true;
            p.pseudo_ack = true;
            break;
        case SchemeId::kThemisLike:
            p.themis_scaling = true;
            break;
        case SchemeId::kMatchRdma:
            p.track_connections = true;
            p.pseudo_ack = true;
            p.budget_gate = true;
            p.control_channel = true;
            p.dest_estimation = true;
            p.cc_proxy = true;
            p.absorb_cnp = true;
            p.clear_ce_at_source = true;
            break;
    }
    return p;
}

const char* to_string(SchemeId id) {
    switch (id) {
        case SchemeId::kDcqcnLike: return "dcqcn";
        case SchemeId::kPseudoAck: return "pseudo_ack";
        case SchemeId::kThemisLike: return "themis";
        case SchemeId::kMatchRdma: return "matchrdma";
    }
    return "?";
}

bool scheme_from_string(const std::string& s, SchemeId& out) {
    if (s == "dcqcn" || s == "dcqcn_like") out = SchemeId::kDcqcnLike;
    else if (s == "pseudo_ack" || s == "pseudo-ack") out = SchemeId::kPseudoAck;
    else if (s == "themis" || s == "themis_like") out = SchemeId::kThemisLike;
    else if (s == "matchrdma" || s == "match_rdma") out = SchemeId::kMatchRdma;
    else return false;
    return true;
}

}  // namespace matchrdma
