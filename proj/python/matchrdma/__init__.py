"""Packet-level simulator of rate-matched long-haul RDMA over OTN.

The compiled core exposes the main operations:

    run_scenario(config_json) -> dict
    run_sweep(config_json, grid="", jobs=1) -> CSV string
    summarize(sweep_csv) -> CSV string
    required_buffer_bytes(r_in, r_out, horizon_ns, tau_ns) -> int
    default_config() -> JSON string
"""

from matchrdma._core import (  # noqa: F401
    __version__,
    default_config,
    required_buffer_bytes,
    run_scenario,
    run_sweep,
    summarize,
)
