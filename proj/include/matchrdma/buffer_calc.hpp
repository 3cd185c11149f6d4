#pragma once

#include <cstdint>
#include <vector>

#include "matchrdma/sim_time.hpp"

namespace matchrdma {

// Piecewise-constant rate trace: rate(t) = points[i].rate_bps for
// t in [points[i].at, points[i+1].at), and the last segment extends to
// `horizon_ns`. Points must be sorted by time, first point at t = 0.
struct RateTrace {
    struct Point {
        SimTime at = 0;
        double rate_bps = 0.0;
    };
    std::vector<Point> points;
    SimTime horizon_ns = 0;

    bool empty() const { return points.empty() || horizon_ns <= 0; }
    double rate_at(SimTime t) const;
};

// Minimum runtime buffer (bytes) that absorbs the accumulated in/out rate
// mismatch over any window of length tau:
//
//     sup over t of the integral over [t, t+tau) of (r_in(u) - r_out(u))^+ du
//
// Evaluated exactly on the union of the two traces' breakpoints: the window
// integral is piecewise linear in t, so the supremum is attained at a vertex
// (a t where either window edge crosses a breakpoint). If tau exceeds the
// common horizon the single truncated window [0, horizon) is used.
std::uint64_t required_buffer_bytes(const RateTrace& r_in, const RateTrace& r_out, SimTime tau);

}  // namespace matchrdma
