#include "matchrdma/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "matchrdma/event_engine.hpp"

namespace matchrdma {

SimTime percentile_ns(std::vector<SimTime> samples, double p) {
    if (samples.empty()) return 0;
    std::sort(samples.begin(), samples.end());
    std::size_t rank =
        static_cast<std::size_t>(std::ceil(p * static_cast<double>(samples.size())));
    if (rank < 1) rank = 1;
    if (rank > samples.size()) rank = samples.size();
    return samples[rank - 1];
}

const char* MetricsRecord::csv_header() {
    return "scenario_id,scheme,distance_km,msg_size_B,concurrency,goodput_bps,"
           "goodput_active_bps,peak_buf_B,mean_buf_B,pause_ratio,fct_mean_ns,fct_p99_ns,"
           "drops,control_msgs,error";
}

std::string MetricsRecord::csv_row() const {
    char pause[32];
    std::snprintf(pause, sizeof(pause), "%.6f", pause_ratio);
    std::ostringstream out;
    out << scenario_id << ',' << scheme << ',' << distance_km << ',' << msg_size_bytes << ','
        << concurrency << ',' << goodput_bps << ',' << goodput_active_bps << ','
        << peak_buf_bytes << ',' << mean_buf_bytes << ',' << pause << ',' << fct_mean_ns << ','
        << fct_p99_ns << ',' << drops << ',' << control_msgs << ',' << error;
    return out.str();
}

MetricsRecord MetricsRecord::from_csv_row(const std::string& row) {
    std::vector<std::string> cols;
    std::stringstream ss(row);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    while (cols.size() < 15) cols.emplace_back();
    MetricsRecord r;
    r.scenario_id = cols[0];
    r.scheme = cols[1];
    r.distance_km = static_cast<std::uint32_t>(std::stoul(cols[2]));
    r.msg_size_bytes = std::stoull(cols[3]);
    r.concurrency = static_cast<std::uint32_t>(std::stoul(cols[4]));
    r.goodput_bps = std::stoull(cols[5]);
    r.goodput_active_bps = std::stoull(cols[6]);
    r.peak_buf_bytes = std::stoull(cols[7]);
    r.mean_buf_bytes = std::stoull(cols[8]);
    r.pause_ratio = std::stod(cols[9]);
    r.fct_mean_ns = std::stoll(cols[10]);
    r.fct_p99_ns = std::stoll(cols[11]);
    r.drops = std::stoull(cols[12]);
    r.control_msgs = std::stoull(cols[13]);
    r.error = cols[14];
    return r;
}

std::string records_to_csv(const std::vector<MetricsRecord>& rows) {
    std::ostringstream out;
    out << MetricsRecord::csv_header() << '\n';
    for (const auto& r : rows) out << r.csv_row() << '\n';
    return out.str();
}

std::vector<MetricsRecord> records_from_csv(const std::string& csv) {
    std::vector<MetricsRecord> rows;
    std::stringstream ss(csv);
    std::string line;
    bool first = true;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("scenario_id,", 0) == 0) continue;
        }
        rows.push_back(MetricsRecord::from_csv_row(line));
    }
    return rows;
}

std::string summarize_comparison(const std::vector<MetricsRecord>& rows) {
    // group rows by (distance, size, concurrency, seed-suffix of id)
    std::map<std::string, std::map<std::string, const MetricsRecord*>> points;
    for (const auto& r : rows) {
        std::ostringstream key;
        key << r.distance_km << 'x' << r.msg_size_bytes << 'x' << r.concurrency;
        points[key.str()][r.scheme] = &r;
    }
    std::ostringstream out;
    out << "point,goodput_ratio,buffer_reduction_pct,pause_reduction_pct,fct_reduction_pct\n";
    double max_ratio = 0, max_buf = 0, max_pause = 0, max_fct = 0;
    bool any = false;
    for (const auto& [key, schemes] : points) {
        auto base_it = schemes.find("dcqcn");
        auto match_it = schemes.find("matchrdma");
        if (base_it == schemes.end() || match_it == schemes.end()) {
            out << key << ",skipped (missing scheme rows)\n";
            continue;
        }
        const MetricsRecord& base = *base_it->second;
        const MetricsRecord& match = *match_it->second;
        const double ratio =
            base.goodput_active_bps > 0
                ? static_cast<double>(match.goodput_active_bps) /
                      static_cast<double>(base.goodput_active_bps)
                : 0.0;
        auto reduction = [](double from, double to) {
            return from > 0 ? 100.0 * (from - to) / from : 0.0;
        };
        const double buf = reduction(static_cast<double>(base.peak_buf_bytes),
                                     static_cast<double>(match.peak_buf_bytes));
        const double pause = reduction(base.pause_ratio, match.pause_ratio);
        const double fct = reduction(static_cast<double>(base.fct_mean_ns),
                                     static_cast<double>(match.fct_mean_ns));
        char line[256];
        std::snprintf(line, sizeof(line), "%s,%.3f,%.1f,%.1f,%.1f\n", key.c_str(), ratio, buf,
                      pause, fct);
        out << line;
        max_ratio = std::max(max_ratio, ratio);
        max_buf = std::max(max_buf, buf);
        max_pause = std::max(max_pause, pause);
        max_fct = std::max(max_fct, fct);
        any = true;
    }
    if (any) {
        char line[256];
        std::snprintf(line, sizeof(line), "max,%.3f,%.1f,%.1f,%.1f\n", max_ratio, max_buf,
                      max_pause, max_fct);
        out << line;
    }
    return out.str();
}

}  // namespace matchrdma
