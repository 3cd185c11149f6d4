#include "matchrdma/buffer_calc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace matchrdma {

namespace {

using i128 = __int128;

// Mismatch (r_in - r_out)^+ as an integer rate in bits/s per segment, over
// the merged breakpoint grid. Rates are rounded to whole bits/s once, so the
// exact evaluation and any independent integrator see the same step function.
struct StepFn {
    std::vector<SimTime> edges;     // segment boundaries, edges.front() = 0
    std::vector<std::int64_t> bps;  // bps[i] on [edges[i], edges[i+1])

    SimTime horizon() const { return edges.back(); }

    // Integral of the step function over [a, b), in bit-nanoseconds.
    i128 integral(SimTime a, SimTime b) const {
        if (a >= b) return 0;
        i128 acc = 0;
        auto it = std::upper_bound(edges.begin(), edges.end(), a);
        std::size_t i = static_cast<std::size_t>(it - edges.begin()) - 1;
        SimTime cur = a;
        while (cur < b && i < bps.size()) {
            SimTime seg_end = std::min<SimTime>(edges[i + 1], b);
            acc += static_cast<i128>(bps[i]) * (seg_end - cur);
            cur = seg_end;
            ++i;
        }
        return acc;
    }
};

StepFn build_mismatch(const RateTrace& r_in, const RateTrace& r_out) {
    StepFn f;
    SimTime horizon = std::min(r_in.horizon_ns, r_out.horizon_ns);
    std::vector<SimTime> edges;
    edges.push_back(0);
    for (const auto& p : r_in.points)
        if (p.at > 0 && p.at < horizon) edges.push_back(p.at);
    for (const auto& p : r_out.points)
        if (p.at > 0 && p.at < horizon) edges.push_back(p.at);
    edges.push_back(horizon);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    f.edges = edges;
    f.bps.reserve(edges.size() - 1);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        double d = r_in.rate_at(edges[i]) - r_out.rate_at(edges[i]);
        f.bps.push_back(d > 0 ? static_cast<std::int64_t>(std::llround(d)) : 0);
    }
    return f;
}

}  // namespace

double RateTrace::rate_at(SimTime t) const {
    if (points.empty()) return 0.0;
    auto it = std::upper_bound(points.begin(), points.end(), t,
                               [](SimTime v, const Point& p) { return v < p.at; });
    if (it == points.begin()) return 0.0;
    return std::prev(it)->rate_bps;
}

std::uint64_t required_buffer_bytes(const RateTrace& r_in, const RateTrace& r_out, SimTime tau) {
    if (r_in.empty() || r_out.empty() || tau <= 0) return 0;
    StepFn f = build_mismatch(r_in, r_out);
    SimTime horizon = f.horizon();
    if (horizon <= 0) return 0;

    i128 best = 0;
    if (tau >= horizon) {
        best = f.integral(0, horizon);
    } else {
        // Candidate window starts: every t where t or t + tau sits on a
        // breakpoint, clipped to [0, horizon - tau].
        std::vector<SimTime> starts;
        for (SimTime e : f.edges) {
            if (e <= horizon - tau) starts.push_back(e);
            SimTime s = e - tau;
            if (s >= 0 && s <= horizon - tau) starts.push_back(s);
        }
        starts.push_back(horizon - tau);
        std::sort(starts.begin(), starts.end());
        starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
        for (SimTime t : starts) best = std::max(best, f.integral(t, t + tau));
    }
    // bit-ns -> bytes, rounding down (a partial byte needs no extra slot).
    return static_cast<std::uint64_t>(best / (8 * 1000000000LL));
}

}  // namespace matchrdma
