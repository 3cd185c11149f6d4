#include "matchrdma/scenario.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace matchrdma {

using nlohmann::json;

std::uint64_t parse_size_bytes(const std::string& text) {
    if (text.empty()) throw SimulationError("empty size");
    std::size_t pos = 0;
    const double value = std::stod(text, &pos);
    std::string suffix = text.substr(pos);
    double mult = 1.0;
    if (suffix == "KB" || suffix == "K" || suffix == "kb") mult = 1024.0;
    else if (suffix == "MB" || suffix == "M" || suffix == "mb") mult = 1024.0 * 1024.0;
    else if (suffix == "GB" || suffix == "G" || suffix == "gb") mult = 1024.0 * 1024.0 * 1024.0;
    else if (!suffix.empty() && suffix != "B") throw SimulationError("bad size suffix: " + text);
    return static_cast<std::uint64_t>(value * mult);
}

namespace {

std::uint64_t size_field(const json& j, const char* key, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_string()) return parse_size_bytes(v.get<std::string>());
    return v.get<std::uint64_t>();
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

std::string ScenarioConfig::scenario_id() const { return id; }

ScenarioConfig scenario_from_json(const std::string& json_text) {
    ScenarioConfig cfg;
    const json j = json::parse(json_text);

    get_to(j, "id", cfg.id);
    if (j.contains("scheme")) {
        const std::string s = j.at("scheme").get<std::string>();
        if (!scheme_from_string(s, cfg.scheme)) throw SimulationError("unknown scheme: " + s);
    }
    get_to(j, "seed", cfg.seed);
    if (j.contains("distance_km")) j.at("distance_km").get_to(cfg.topology.distance_km);
    if (j.contains("max_duration_ms")) {
        cfg.max_duration = j.at("max_duration_ms").get<std::int64_t>() * kMillisecond;
    }
    get_to(j, "trace", cfg.trace);
    get_to(j, "trace_dir", cfg.trace_dir);

    if (j.contains("topology")) {
        const json& t = j.at("topology");
        get_to(t, "leaves", cfg.topology.leaves);
        get_to(t, "spines", cfg.topology.spines);
        get_to(t, "servers_per_leaf", cfg.topology.servers_per_leaf);
        get_to(t, "otn_parallel_links", cfg.topology.otn_parallel_links);
        get_to(t, "server_link_gbps", cfg.topology.server_link_gbps);
        get_to(t, "fabric_link_gbps", cfg.topology.fabric_link_gbps);
        get_to(t, "otn_link_gbps", cfg.topology.otn_link_gbps);
        get_to(t, "dc_facing_gbps", cfg.topology.dc_facing_gbps);
        get_to(t, "distance_km", cfg.topology.distance_km);
        if (t.contains("intra_prop_us")) {
            cfg.topology.intra_prop = t.at("intra_prop_us").get<std::int64_t>() * kMicrosecond;
        }
        cfg.topology.switch_queue_capacity =
            size_field(t, "switch_queue_capacity", cfg.topology.switch_queue_capacity);
        cfg.topology.otn_egress_queue_capacity =
            size_field(t, "otn_egress_queue_capacity", cfg.topology.otn_egress_queue_capacity);
    }

    if (j.contains("transport")) {
        const json& t = j.at("transport");
        get_to(t, "mtu_payload", cfg.transport.mtu_payload);
        cfg.transport.window_cap = size_field(t, "window_cap", cfg.transport.window_cap);
        get_to(t, "ack_coalesce", cfg.transport.ack_coalesce);
        if (t.contains("cnp_min_interval_us")) {
            cfg.transport.cnp_min_interval =
                t.at("cnp_min_interval_us").get<std::int64_t>() * kMicrosecond;
        }
        if (t.contains("min_rto_us")) {
            cfg.transport.min_rto = t.at("min_rto_us").get<std::int64_t>() * kMicrosecond;
        }
        get_to(t, "themis_ratio_cap", cfg.transport.themis_ratio_cap);
        if (t.contains("dcqcn")) {
            const json& d = t.at("dcqcn");
            get_to(d, "g", cfg.transport.dcqcn.g);
            if (d.contains("alpha_timer_us")) {
                cfg.transport.dcqcn.alpha_timer =
                    d.at("alpha_timer_us").get<std::int64_t>() * kMicrosecond;
            }
            if (d.contains("increase_timer_us")) {
                cfg.transport.dcqcn.increase_timer =
                    d.at("increase_timer_us").get<std::int64_t>() * kMicrosecond;
            }
            get_to(d, "byte_counter", cfg.transport.dcqcn.byte_counter);
            get_to(d, "fast_recovery_events", cfg.transport.dcqcn.fast_recovery_events);
            if (d.contains("rate_ai_mbps")) {
                cfg.transport.dcqcn.rate_ai_bps = d.at("rate_ai_mbps").get<double>() * 1e6;
            }
            if (d.contains("min_rate_mbps")) {
                cfg.transport.dcqcn.min_rate_bps = d.at("min_rate_mbps").get<double>() * 1e6;
            }
        }
    }

    if (j.contains("otn")) {
        const json& o = j.at("otn");
        EstimatorConfig& e = cfg.otn.estimator;
        if (o.contains("t_slot_us")) e.slot_len = o.at("t_slot_us").get<std::int64_t>() * kMicrosecond;
        get_to(o, "history_slots", e.history_slots);
        get_to(o, "min_stable_window", e.min_stable_window);
        get_to(o, "cv_epsilon", e.cv_epsilon);
        get_to(o, "weight_stable", e.weight_stable);
        get_to(o, "weight_jitter", e.weight_jitter);
        get_to(o, "beta", e.beta);
        get_to(o, "headroom", e.headroom);
        if (o.contains("rate_floor_gbps")) {
            e.rate_floor_bps = o.at("rate_floor_gbps").get<double>() * 1e9;
        }
        get_to(o, "update_every_slots", e.update_every_slots);
        get_to(o, "suppress_delta", e.suppress_delta);
        if (o.contains("theta_ack_us")) {
            e.theta_ack = o.at("theta_ack_us").get<std::int64_t>() * kMicrosecond;
            cfg.otn_theta_ack_set = true;
        }
        get_to(o, "theta_cnp_per_ms", e.theta_cnp_per_ms);
        get_to(o, "probe_growth", e.probe_growth);
        get_to(o, "probe_growth_cold", e.probe_growth_cold);
        get_to(o, "probe_hold_after_tighten", e.probe_hold_after_tighten);
        cfg.otn.bucket_burst_bytes =
            static_cast<double>(size_field(o, "bucket_burst",
                                           static_cast<std::uint64_t>(cfg.otn.bucket_burst_bytes)));
        cfg.otn.staging_xoff = size_field(o, "staging_xoff", cfg.otn.staging_xoff);
        cfg.otn.staging_xon = size_field(o, "staging_xon", cfg.otn.staging_xon);
        cfg.otn.proxy_aggregate_onset =
            size_field(o, "proxy_aggregate_onset", cfg.otn.proxy_aggregate_onset);
        cfg.otn.proxy_threshold_bytes =
            size_field(o, "proxy_threshold", cfg.otn.proxy_threshold_bytes);
        if (o.contains("budget_valid_for_ms")) {
            cfg.otn.budget_valid_for = o.at("budget_valid_for_ms").get<std::int64_t>() * kMillisecond;
        }
        cfg.otn.dest_buffer_capacity =
            size_field(o, "dest_buffer_capacity", cfg.otn.dest_buffer_capacity);
    }

    if (j.contains("workload")) {
        const json& w = j.at("workload");
        cfg.workload.msg_size = size_field(w, "msg_size", cfg.workload.msg_size);
        get_to(w, "concurrency", cfg.workload.concurrency);
        get_to(w, "iterations", cfg.workload.iterations);
        if (w.contains("compute_ms")) {
            cfg.workload.compute_time =
                static_cast<SimTime>(w.at("compute_ms").get<double>() * kMillisecond);
        }
        get_to(w, "jitter_pct", cfg.workload.jitter_pct);
        get_to(w, "intra_dc_load", cfg.workload.intra_dc_load);
        get_to(w, "continuous", cfg.workload.continuous);
        cfg.workload.bg_min_size = size_field(w, "bg_min_size", cfg.workload.bg_min_size);
        cfg.workload.bg_max_size = size_field(w, "bg_max_size", cfg.workload.bg_max_size);
    }

    if (j.contains("congestion")) {
        const json& c = j.at("congestion");
        cfg.drain.enabled = true;
        if (c.contains("drain_drop_at_ms")) {
            cfg.drain.at = static_cast<SimTime>(c.at("drain_drop_at_ms").get<double>() * kMillisecond);
        }
        get_to(c, "drain_pre_gbps", cfg.drain.pre_gbps);
        get_to(c, "drain_post_gbps", cfg.drain.post_gbps);
    }
    return cfg;
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
    json j;
    j["id"] = cfg.id;
    j["scheme"] = to_string(cfg.scheme);
    j["seed"] = cfg.seed;
    j["distance_km"] = cfg.topology.distance_km;
    j["max_duration_ms"] = cfg.max_duration / kMillisecond;
    j["trace"] = cfg.trace;
    j["topology"] = {
        {"leaves", cfg.topology.leaves},
        {"spines", cfg.topology.spines},
        {"servers_per_leaf", cfg.topology.servers_per_leaf},
        {"otn_parallel_links", cfg.topology.otn_parallel_links},
        {"server_link_gbps", cfg.topology.server_link_gbps},
        {"fabric_link_gbps", cfg.topology.fabric_link_gbps},
        {"otn_link_gbps", cfg.topology.otn_link_gbps},
        {"dc_facing_gbps", cfg.topology.dc_facing_gbps},
        {"intra_prop_us", cfg.topology.intra_prop / kMicrosecond},
        {"switch_queue_capacity", cfg.topology.switch_queue_capacity},
        {"otn_egress_queue_capacity", cfg.topology.otn_egress_queue_capacity},
    };
    j["transport"] = {
        {"mtu_payload", cfg.transport.mtu_payload},
        {"window_cap", cfg.transport.window_cap},
        {"ack_coalesce", cfg.transport.ack_coalesce},
        {"cnp_min_interval_us", cfg.transport.cnp_min_interval / kMicrosecond},
        {"min_rto_us", cfg.transport.min_rto / kMicrosecond},
        {"themis_ratio_cap", cfg.transport.themis_ratio_cap},
        {"dcqcn",
         {{"g", cfg.transport.dcqcn.g},
          {"alpha_timer_us", cfg.transport.dcqcn.alpha_timer / kMicrosecond},
          {"increase_timer_us", cfg.transport.dcqcn.increase_timer / kMicrosecond},
          {"byte_counter", cfg.transport.dcqcn.byte_counter},
          {"fast_recovery_events", cfg.transport.dcqcn.fast_recovery_events},
          {"rate_ai_mbps", cfg.transport.dcqcn.rate_ai_bps / 1e6},
          {"min_rate_mbps", cfg.transport.dcqcn.min_rate_bps / 1e6}}},
    };
    j["otn"] = {
        {"t_slot_us", cfg.otn.estimator.slot_len / kMicrosecond},
        {"history_slots", cfg.otn.estimator.history_slots},
        {"min_stable_window", cfg.otn.estimator.min_stable_window},
        {"cv_epsilon", cfg.otn.estimator.cv_epsilon},
        {"weight_stable", cfg.otn.estimator.weight_stable},
        {"weight_jitter", cfg.otn.estimator.weight_jitter},
        {"beta", cfg.otn.estimator.beta},
        {"headroom", cfg.otn.estimator.headroom},
        {"rate_floor_gbps", cfg.otn.estimator.rate_floor_bps / 1e9},
        {"update_every_slots", cfg.otn.estimator.update_every_slots},
        {"suppress_delta", cfg.otn.estimator.suppress_delta},
        {"theta_cnp_per_ms", cfg.otn.estimator.theta_cnp_per_ms},
        {"probe_growth", cfg.otn.estimator.probe_growth},
        {"probe_growth_cold", cfg.otn.estimator.probe_growth_cold},
        {"probe_hold_after_tighten", cfg.otn.estimator.probe_hold_after_tighten},
        {"bucket_burst", static_cast<std::uint64_t>(cfg.otn.bucket_burst_bytes)},
        {"staging_xoff", cfg.otn.staging_xoff},
        {"staging_xon", cfg.otn.staging_xon},
        {"proxy_aggregate_onset", cfg.otn.proxy_aggregate_onset},
        {"proxy_threshold", cfg.otn.proxy_threshold_bytes},
        {"budget_valid_for_ms", cfg.otn.budget_valid_for / kMillisecond},
        {"dest_buffer_capacity", cfg.otn.dest_buffer_capacity},
    };
    j["workload"] = {
        {"msg_size", cfg.workload.msg_size},
        {"concurrency", cfg.workload.concurrency},
        {"iterations", cfg.workload.iterations},
        {"compute_ms", static_cast<double>(cfg.workload.compute_time) / kMillisecond},
        {"jitter_pct", cfg.workload.jitter_pct},
        {"intra_dc_load", cfg.workload.intra_dc_load},
        {"continuous", cfg.workload.continuous},
    };
    if (cfg.drain.enabled) {
        j["congestion"] = {
            {"drain_drop_at_ms", static_cast<double>(cfg.drain.at) / kMillisecond},
            {"drain_pre_gbps", cfg.drain.pre_gbps},
            {"drain_post_gbps", cfg.drain.post_gbps},
        };
    }
    return j.dump(2);
}

ScenarioConfig scenario_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SimulationError("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return scenario_from_json(ss.str());
}

}  // namespace matchrdma
