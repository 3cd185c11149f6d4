#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "matchrdma/buffer_calc.hpp"
#include "matchrdma/runner.hpp"
#include "matchrdma/scenario.hpp"
#include "matchrdma/simulation.hpp"

namespace py = pybind11;
using namespace matchrdma;

namespace {

RateTrace make_trace(const std::vector<std::pair<std::int64_t, double>>& points,
                     std::int64_t horizon_ns) {
    RateTrace t;
    t.horizon_ns = horizon_ns;
    for (const auto& [at, bps] : points) t.points.push_back({at, bps});
    return t;
}

py::dict record_to_dict(const MetricsRecord& r) {
    py::dict d;
    d["scenario_id"] = r.scenario_id;
    d["scheme"] = r.scheme;
    d["distance_km"] = r.distance_km;
    d["msg_size_B"] = r.msg_size_bytes;
    d["concurrency"] = r.concurrency;
    d["goodput_bps"] = r.goodput_bps;
    d["goodput_active_bps"] = r.goodput_active_bps;
    d["peak_buf_B"] = r.peak_buf_bytes;
    d["mean_buf_B"] = r.mean_buf_bytes;
    d["pause_ratio"] = r.pause_ratio;
    d["fct_mean_ns"] = r.fct_mean_ns;
    d["fct_p99_ns"] = r.fct_p99_ns;
    d["drops"] = r.drops;
    d["control_msgs"] = r.control_msgs;
    d["error"] = r.error;
    d["fct_mean_inter_ns"] = r.fct_mean_inter_ns;
    d["fct_mean_intra_ns"] = r.fct_mean_intra_ns;
    d["inter_messages"] = r.inter_messages;
    d["intra_messages"] = r.intra_messages;
    d["duration_ns"] = r.duration_ns;
    d["active_ns"] = r.active_ns;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Packet-level simulator of rate-matched long-haul RDMA over OTN";

    m.def(
        "run_scenario",
        [](const std::string& config_json) {
            return record_to_dict(run_scenario(scenario_from_json(config_json)));
        },
        py::arg("config_json"),
        "Run one scenario described by a config JSON string; returns the metrics record.");

    m.def(
        "run_sweep",
        [](const std::string& config_json, const std::string& grid, unsigned jobs) {
            ScenarioConfig base = scenario_from_json(config_json);
            SweepGrid g = grid.empty() ? default_grid() : parse_grid(grid);
            auto rows = run_sweep(base, g, jobs);
            return records_to_csv(rows);
        },
        py::arg("config_json"), py::arg("grid") = "", py::arg("jobs") = 1,
        "Run a scenario grid; returns the sweep CSV "
        "(axes like 'distance_km=1,1000;scheme=dcqcn,matchrdma').");

    m.def(
        "summarize",
        [](const std::string& csv) { return summarize_comparison(records_from_csv(csv)); },
        py::arg("sweep_csv"), "Per-grid-point scheme comparison table from a sweep CSV.");

    m.def(
        "required_buffer_bytes",
        [](const std::vector<std::pair<std::int64_t, double>>& r_in,
           const std::vector<std::pair<std::int64_t, double>>& r_out, std::int64_t horizon_ns,
           std::int64_t tau_ns) {
            return required_buffer_bytes(make_trace(r_in, horizon_ns),
                                         make_trace(r_out, horizon_ns), tau_ns);
        },
        py::arg("r_in"), py::arg("r_out"), py::arg("horizon_ns"), py::arg("tau_ns"),
        "Minimum runtime buffer (bytes) for piecewise-constant rate traces: the supremum over "
        "t of the integral of (r_in - r_out)^+ over [t, t+tau). Traces are (time_ns, bps) "
        "breakpoint lists starting at 0.");

    m.def("default_config", [] { return scenario_to_json(ScenarioConfig{}); },
          "The reference configuration as a JSON string.");

    m.attr("__version__") = "0.1.0";
}
