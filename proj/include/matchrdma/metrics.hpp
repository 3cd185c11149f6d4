#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matchrdma/sim_time.hpp"
#include "matchrdma/transport.hpp"

namespace matchrdma {

// One row of the sweep CSV. Column order is part of the file format:
// scenario_id, scheme, distance_km, msg_size_B, concurrency, goodput_bps,
// goodput_active_bps, peak_buf_B, mean_buf_B, pause_ratio, fct_mean_ns,
// fct_p99_ns, drops, control_msgs, error
struct MetricsRecord {
    std::string scenario_id;
    std::string scheme;
    std::uint32_t distance_km = 0;
    std::uint64_t msg_size_bytes = 0;
    std::uint32_t concurrency = 0;
    std::uint64_t goodput_bps = 0;         // inter-DC payload over run duration
    std::uint64_t goodput_active_bps = 0;  // over the communication-active window
    std::uint64_t peak_buf_bytes = 0;
    std::uint64_t mean_buf_bytes = 0;
    double pause_ratio = 0.0;
    std::int64_t fct_mean_ns = 0;
    std::int64_t fct_p99_ns = 0;
    std::uint64_t drops = 0;
    std::uint64_t control_msgs = 0;
    std::string error;

    // Not part of the CSV: per-class and audit extras.
    std::int64_t fct_mean_inter_ns = 0;
    std::int64_t fct_p99_inter_ns = 0;
    std::int64_t fct_mean_intra_ns = 0;
    std::uint64_t inter_messages = 0;
    std::uint64_t intra_messages = 0;
    double inter_goodput_bps = 0.0;
    double intra_goodput_bps = 0.0;
    SimTime duration_ns = 0;
    SimTime active_ns = 0;
    std::uint64_t events = 0;

    std::string csv_row() const;
    static const char* csv_header();
    static MetricsRecord from_csv_row(const std::string& row);
};

std::string records_to_csv(const std::vector<MetricsRecord>& rows);
std::vector<MetricsRecord> records_from_csv(const std::string& csv);

// Per-grid-point scheme comparison (MatchRDMA against the DCQCN-like
// baseline) plus the max over the grid.
struct ComparisonRow {
    std::string key;
    double goodput_ratio = 0.0;
    double buffer_reduction_pct = 0.0;
    double pause_reduction_pct = 0.0;
    double fct_reduction_pct = 0.0;
};
std::string summarize_comparison(const std::vector<MetricsRecord>& rows);

// Run-wide collection: delivered ledgers, FCT samples, pause accounting,
// wire-conservation counters.
class MetricsCollector {
  public:
    // wire accounting (packet copies placed on any first-hop or relay queue)
    void on_wire_enqueue(std::uint64_t n = 1) { wire_created_ += n; }
    void on_wire_consumed() { ++wire_consumed_; }
    void on_wire_dropped(std::uint64_t payload) {
        ++wire_dropped_;
        dropped_payload_ += payload;
    }

    void on_delivered_payload(FlowClass cls, std::uint64_t bytes) {
        if (cls == FlowClass::kInterDc) inter_delivered_ += bytes;
        else intra_delivered_ += bytes;
    }
    void on_message_complete(FlowClass cls, SimTime fct) {
        (cls == FlowClass::kInterDc ? fct_inter_ : fct_intra_).push_back(fct);
    }
    void on_control_message(std::uint64_t bytes) {
        ++control_msgs_;
        control_bytes_ += bytes;
    }
    void add_active_window(SimTime span) { active_ns_ += span; }

    std::uint64_t wire_created() const { return wire_created_; }
    std::uint64_t wire_consumed() const { return wire_consumed_; }
    std::uint64_t wire_dropped() const { return wire_dropped_; }
    std::uint64_t drops() const { return wire_dropped_; }
    std::uint64_t inter_delivered() const { return inter_delivered_; }
    std::uint64_t intra_delivered() const { return intra_delivered_; }
    std::uint64_t control_msgs() const { return control_msgs_; }
    SimTime active_ns() const { return active_ns_; }
    const std::vector<SimTime>& fct_inter() const { return fct_inter_; }
    const std::vector<SimTime>& fct_intra() const { return fct_intra_; }

  private:
    std::uint64_t wire_created_ = 0;
    std::uint64_t wire_consumed_ = 0;
    std::uint64_t wire_dropped_ = 0;
    std::uint64_t dropped_payload_ = 0;
    std::uint64_t inter_delivered_ = 0;
    std::uint64_t intra_delivered_ = 0;
    std::uint64_t control_msgs_ = 0;
    std::uint64_t control_bytes_ = 0;
    SimTime active_ns_ = 0;
    std::vector<SimTime> fct_inter_;
    std::vector<SimTime> fct_intra_;
};

SimTime percentile_ns(std::vector<SimTime> samples, double p);

}  // namespace matchrdma
