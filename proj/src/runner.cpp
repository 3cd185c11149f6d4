#include "matchrdma/runner.hpp"

#include <future>
#include <sstream>

#include "matchrdma/simulation.hpp"

namespace matchrdma {

MetricsRecord run_scenario(const ScenarioConfig& cfg) {
    Simulation sim(cfg);
    return sim.run();
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep)) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

}  // namespace

SweepGrid parse_grid(const std::string& spec) {
    SweepGrid g;
    for (const std::string& axis : split(spec, ';')) {
        const auto eq = axis.find('=');
        if (eq == std::string::npos) throw SimulationError("bad grid axis: " + axis);
        const std::string name = axis.substr(0, eq);
        const auto values = split(axis.substr(eq + 1), ',');
        if (name == "distance_km" || name == "distances") {
            for (const auto& v : values) g.distances_km.push_back(std::stoul(v));
        } else if (name == "msg_size" || name == "sizes") {
            for (const auto& v : values) g.msg_sizes.push_back(parse_size_bytes(v));
        } else if (name == "concurrency") {
            for (const auto& v : values) g.concurrencies.push_back(std::stoul(v));
        } else if (name == "scheme" || name == "schemes") {
            for (const auto& v : values) {
                SchemeId id;
                if (!scheme_from_string(v, id)) throw SimulationError("unknown scheme: " + v);
                g.schemes.push_back(id);
            }
        } else if (name == "seed" || name == "seeds") {
            for (const auto& v : values) g.seeds.push_back(std::stoull(v));
        } else {
            throw SimulationError("unknown grid axis: " + name);
        }
    }
    return g;
}

SweepGrid default_grid() {
    SweepGrid g;
    g.distances_km = {1, 10, 50, 100, 500, 1000};
    g.msg_sizes = {1024, 64 * 1024, 1024 * 1024, 8 * 1024 * 1024};
    g.schemes = {SchemeId::kDcqcnLike, SchemeId::kPseudoAck, SchemeId::kThemisLike,
                 SchemeId::kMatchRdma};
    return g;
}

std::vector<MetricsRecord> run_sweep(const ScenarioConfig& base, const SweepGrid& grid,
                                     unsigned jobs) {
    SweepGrid g = grid;
    if (g.distances_km.empty()) g.distances_km = {base.topology.distance_km};
    if (g.msg_sizes.empty()) g.msg_sizes = {base.workload.msg_size};
    if (g.concurrencies.empty()) g.concurrencies = {base.workload.concurrency};
    if (g.schemes.empty()) g.schemes = {base.scheme};
    if (g.seeds.empty()) g.seeds = {base.seed};

    std::vector<ScenarioConfig> cfgs;
    for (std::uint32_t d : g.distances_km) {
        for (std::uint64_t s : g.msg_sizes) {
            for (std::uint32_t c : g.concurrencies) {
                for (SchemeId sch : g.schemes) {
                    for (std::uint64_t seed : g.seeds) {
                        ScenarioConfig cfg = base;
                        cfg.topology.distance_km = d;
                        cfg.workload.msg_size = s;
                        cfg.workload.concurrency = c;
                        cfg.scheme = sch;
                        cfg.seed = seed;
                        std::ostringstream id;
                        id << to_string(sch) << "_d" << d << "_s" << s << "_c" << c << "_seed"
                           << seed;
                        cfg.id = id.str();
                        cfgs.push_back(std::move(cfg));
                    }
                }
            }
        }
    }

    std::vector<MetricsRecord> rows(cfgs.size());
    auto run_one = [&](std::size_t i) {
        try {
            rows[i] = run_scenario(cfgs[i]);
        } catch (const std::exception& e) {
            MetricsRecord r;
            r.scenario_id = cfgs[i].id;
            r.scheme = to_string(cfgs[i].scheme);
            r.distance_km = cfgs[i].topology.distance_km;
            r.msg_size_bytes = cfgs[i].workload.msg_size;
            r.concurrency = cfgs[i].workload.concurrency;
            r.error = e.what();
            rows[i] = std::move(r);
        }
    };

    if (jobs <= 1) {
        for (std::size_t i = 0; i < cfgs.size(); ++i) run_one(i);
        return rows;
    }
    // grid points are independent runs; output order stays the grid order
    std::size_t next = 0;
    while (next < cfgs.size()) {
        std::vector<std::future<void>> batch;
        for (unsigned k = 0; k < jobs && next < cfgs.size(); ++k, ++next) {
            batch.push_back(std::async(std::launch::async, run_one, next));
        }
        for (auto& fut : batch) fut.get();
    }
    return rows;
}

}  // namespace matchrdma
