#include "matchrdma/rate_estimator.hpp"

#include <algorithm>
#include <cmath>

namespace matchrdma {

const char* to_string(CongestionLevel level) {
    switch (level) {
        case CongestionLevel::kLow: return "LOW";
        case CongestionLevel::kMed: return "MED";
        case CongestionLevel::kHigh: return "HIGH";
    }
    return "?";
}

CongestionLevel classify_slot(const SlotObservation& obs, const EstimatorConfig& cfg) {
    if (obs.ack_return_count == 0 && obs.delivered_bytes == 0 && obs.cnp_count == 0) {
        return CongestionLevel::kLow;
    }
    const double cnp_per_ms =
        static_cast<double>(obs.cnp_count) * 1e6 / static_cast<double>(obs.slot_len);
    const SimTime mean_ack = obs.mean_ack_return();
    if (mean_ack > cfg.theta_ack || cnp_per_ms > cfg.theta_cnp_per_ms) {
        return CongestionLevel::kHigh;
    }
    if (mean_ack <= cfg.theta_ack / 2 && obs.cnp_count == 0) {
        return CongestionLevel::kLow;
    }
    return CongestionLevel::kMed;
}

double coefficient_of_variation(const double* values, std::size_t n) {
    if (n == 0) return 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += values[i];
    mean /= static_cast<double>(n);
    if (mean == 0.0) return 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = values[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    return std::sqrt(var) / mean;
}

std::vector<SlotRun> detect_stable_windows(const std::deque<SlotObservation>& history,
                                           const EstimatorConfig& cfg) {
    std::vector<SlotRun> runs;
    const std::size_t n = history.size();
    std::vector<double> rates(n);
    for (std::size_t i = 0; i < n; ++i) rates[i] = history[i].delivered_bps();

    std::size_t i = 0;
    while (i < n) {
        // Grow [i, j] until a HIGH slot or the run's CV leaves epsilon.
        std::size_t j = i;
        while (j < n) {
            if (history[j].level == CongestionLevel::kHigh) break;
            if (coefficient_of_variation(&rates[i], j - i + 1) >= cfg.cv_epsilon) break;
            ++j;
        }
        const std::size_t len = j - i;
        if (len >= cfg.min_stable_window) {
            runs.push_back({i, len, true});
            i = j;
        } else {
            // Not long enough: slot i is jitter (merge into a preceding
            // jitter run when possible).
            if (!runs.empty() && !runs.back().stable &&
                runs.back().first + runs.back().count == i) {
                ++runs.back().count;
            } else {
                runs.push_back({i, 1, false});
            }
            ++i;
        }
    }
    return runs;
}

double percentile_nearest_rank(std::vector<double> values, double p) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(values.size())));
    if (rank < 1) rank = 1;
    if (rank > values.size()) rank = values.size();
    return values[rank - 1];
}

RateBudget estimate_rate_budget(const std::deque<SlotObservation>& history,
                                const std::vector<SlotRun>& partition,
                                const EstimateInputs& inputs, const RateBudget& prev,
                                const EstimatorConfig& cfg) {
    RateBudget out;
    out.epoch = prev.epoch + 1;
    if (history.empty()) {
        out.rate_bps = cfg.rate_floor_bps;
        return out;
    }

    double stable_sum = 0.0;
    std::size_t stable_n = 0;
    std::vector<double> jitter_rates;
    for (const auto& run : partition) {
        for (std::size_t k = run.first; k < run.first + run.count; ++k) {
            const double r = history[k].delivered_bps();
            if (run.stable) {
                stable_sum += r;
                ++stable_n;
            } else {
                jitter_rates.push_back(r);
            }
        }
    }
    const double r_stable = stable_n ? stable_sum / static_cast<double>(stable_n) : 0.0;
    const double r_jitter = percentile_nearest_rank(jitter_rates, 0.25);
    const double ws = cfg.weight_stable * static_cast<double>(stable_n);
    const double wj = cfg.weight_jitter * static_cast<double>(jitter_rates.size());
    double raw = (ws + wj) > 0.0 ? (ws * r_stable + wj * r_jitter) / (ws + wj) : 0.0;

    if (inputs.current_level == CongestionLevel::kHigh) raw *= cfg.beta;
    double rate = raw * cfg.headroom;

    if (inputs.current_level == CongestionLevel::kLow && inputs.last_sent_bps > 0.0 &&
        inputs.periods_since_tighten >= cfg.probe_hold_after_tighten) {
        // Gate-limited and quiet: when the freshly delivered rate tracks the
        // enforced budget, the observation says nothing about capacity above
        // it, so probe upward. Whenever a standing queue forms the delivered
        // rate becomes the true drain rate and the weighted mean takes over.
        if (inputs.recent_delivered_bps >= 0.9 * inputs.last_sent_bps) {
            const double g = inputs.congestion_seen ? cfg.probe_growth : cfg.probe_growth_cold;
            rate = std::max(rate, inputs.last_sent_bps * g);
        }
    }

    out.rate_bps = std::clamp(rate, cfg.rate_floor_bps, cfg.capacity_bps);
    return out;
}

}  // namespace matchrdma
