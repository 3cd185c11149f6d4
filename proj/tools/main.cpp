#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "matchrdma/buffer_calc.hpp"
#include "matchrdma/runner.hpp"
#include "matchrdma/scenario.hpp"

using namespace matchrdma;

namespace {

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out << content;
}

RateTrace trace_from_csv(const std::string& path, int rate_col) {
    std::ifstream in(path);
    if (!in) throw SimulationError("cannot open trace: " + path);
    RateTrace t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first && line.find("time_ns") != std::string::npos) {
            first = false;
            continue;
        }
        first = false;
        std::stringstream ss(line);
        std::string col;
        std::vector<std::string> cols;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        t.points.push_back({std::stoll(cols[0]), std::stod(cols[rate_col])});
    }
    if (!t.points.empty()) t.horizon_ns = t.points.back().at;
    return t;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"matchrdma-sim: packet-level long-haul RDMA over OTN simulator"};
    app.require_subcommand(1);

    // run
    std::string run_config, run_out;
    bool run_trace = false;
    std::int64_t run_seed = -1;
    auto* run = app.add_subcommand("run", "run one scenario from a config file");
    run->add_option("config", run_config, "scenario config (JSON)")->required();
    run->add_option("--out", run_out, "output CSV path (default: stdout)");
    run->add_flag("--trace", run_trace, "write <id>.buffer.csv and <id>.budget.csv");
    run->add_option("--seed", run_seed, "override the config seed");

    // sweep
    std::string sweep_config, sweep_grid, sweep_out;
    unsigned sweep_jobs = 1;
    std::int64_t sweep_seed = -1;
    unsigned sweep_seeds_n = 0;
    auto* sweep = app.add_subcommand("sweep", "run a grid of scenarios");
    sweep->add_option("config", sweep_config, "base scenario config (JSON)")->required();
    sweep->add_option("--grid", sweep_grid,
                      "axes, e.g. \"distance_km=1,1000;msg_size=64KB,8MB;scheme=dcqcn,matchrdma\""
                      " (default: the reference grid)");
    sweep->add_option("--out", sweep_out, "output CSV path (default: stdout)");
    sweep->add_option("--jobs", sweep_jobs, "concurrent runs");
    sweep->add_option("--seed", sweep_seed, "override the base seed");
    sweep->add_option("--seeds", sweep_seeds_n, "repeat each point with seeds 1..N");

    // summarize
    std::string sum_csv, sum_out;
    auto* summarize = app.add_subcommand("summarize", "scheme ratios per sweep grid point");
    summarize->add_option("csv", sum_csv, "sweep CSV")->required();
    summarize->add_option("--out", sum_out, "output path (default: stdout)");

    // bufreq: the minimum-runtime-buffer calculator
    std::string in_trace, out_trace;
    double tau_ms = 1.0;
    double rin_gbps = -1, rout_gbps = -1, horizon_ms = 10.0;
    auto* bufreq = app.add_subcommand(
        "bufreq", "minimum runtime buffer for an in/out rate-trace pair over a window tau");
    bufreq->add_option("--in-trace", in_trace, "CSV (time_ns,rate_bps) of the arrival rate");
    bufreq->add_option("--out-trace", out_trace, "CSV (time_ns,rate_bps) of the drain rate");
    bufreq->add_option("--rin-gbps", rin_gbps, "constant arrival rate (alternative to a trace)");
    bufreq->add_option("--rout-gbps", rout_gbps, "constant drain rate");
    bufreq->add_option("--horizon-ms", horizon_ms, "trace horizon for constant rates");
    bufreq->add_option("--tau-ms", tau_ms, "window length")->required();

    // default-config
    std::string def_out;
    auto* defcfg = app.add_subcommand("default-config", "print the reference configuration");
    defcfg->add_option("--out", def_out, "output path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ScenarioConfig cfg = scenario_from_file(run_config);
            if (run_seed >= 0) cfg.seed = static_cast<std::uint64_t>(run_seed);
            cfg.trace = cfg.trace || run_trace;
            MetricsRecord rec = run_scenario(cfg);
            write_or_print(run_out, records_to_csv({rec}));
        } else if (*sweep) {
            ScenarioConfig cfg = scenario_from_file(sweep_config);
            if (sweep_seed >= 0) cfg.seed = static_cast<std::uint64_t>(sweep_seed);
            SweepGrid grid = sweep_grid.empty() ? default_grid() : parse_grid(sweep_grid);
            if (sweep_seeds_n > 0) {
                grid.seeds.clear();
                for (unsigned s = 1; s <= sweep_seeds_n; ++s) grid.seeds.push_back(s);
            }
            auto rows = run_sweep(cfg, grid, sweep_jobs);
            write_or_print(sweep_out, records_to_csv(rows));
        } else if (*summarize) {
            std::ifstream in(sum_csv);
            if (!in) throw SimulationError("cannot open: " + sum_csv);
            std::stringstream ss;
            ss << in.rdbuf();
            write_or_print(sum_out, summarize_comparison(records_from_csv(ss.str())));
        } else if (*bufreq) {
            RateTrace rin, rout;
            const SimTime horizon = static_cast<SimTime>(horizon_ms * kMillisecond);
            if (!in_trace.empty()) rin = trace_from_csv(in_trace, 1);
            else if (rin_gbps >= 0) rin = {{{0, rin_gbps * 1e9}}, horizon};
            else throw SimulationError("need --in-trace or --rin-gbps");
            if (!out_trace.empty()) rout = trace_from_csv(out_trace, 1);
            else if (rout_gbps >= 0) rout = {{{0, rout_gbps * 1e9}}, horizon};
            else throw SimulationError("need --out-trace or --rout-gbps");
            const SimTime tau = static_cast<SimTime>(tau_ms * kMillisecond);
            std::cout << required_buffer_bytes(rin, rout, tau) << "\n";
        } else if (*defcfg) {
            write_or_print(def_out, scenario_to_json(ScenarioConfig{}) + "\n");
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
