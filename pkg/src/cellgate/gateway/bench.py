"""Round-trip latency probe for the HTTP API.

Measures n warm requests over one kept-alive connection; the first request
establishes the connection and is excluded, so the report reflects call time
rather than TCP/TLS setup.  Historical SOAP/CORBA middleware round-trip
figures are included as reference context only and are never asserted.
"""

from __future__ import annotations

import statistics
import time

import httpx

from ..errors import CellgateError

# Published mean round-trip times (ms) of 2004-2008 RPC stacks on LAN
# hardware of that era; context for reading the report, not a target.
REFERENCE_BASELINES_MS = {
    "soap_apache_axis_1_4": 10.10,
    "soap_lite_0_65": 28.11,
    "ms_soap_toolkit_3_0": 12.22,
    "corba_java": 1.02,
}


def run_latency_probe(
    base_url: str,
    token: str,
    endpoint: str = "/v1/modem/status",
    n: int = 1000,
) -> dict:
    if n <= 0:
        raise CellgateError("n must be positive")
    url = base_url.rstrip("/") + endpoint
    headers = {"Authorization": f"Bearer {token}"}
    samples_ms: "list[float]" = []
    with httpx.Client(headers=headers, timeout=10.0) as client:
        warmup = client.get(url)
        warmup.raise_for_status()
        for _ in range(n):
            start = time.perf_counter()
            response = client.get(url)
            elapsed = (time.perf_counter() - start) * 1000.0
            response.raise_for_status()
            samples_ms.append(elapsed)
    ordered = sorted(samples_ms)
    p95_index = max(0, int(round(0.95 * len(ordered))) - 1)
    return {
        "endpoint": endpoint,
        "n": n,
        "excluded": "connection setup (one warmup request on the kept-alive connection)",
        "min_ms": round(ordered[0], 3),
        "median_ms": round(statistics.median(ordered), 3),
        "p95_ms": round(ordered[p95_index], 3),
        "mean_ms": round(statistics.fmean(ordered), 3),
        "max_ms": round(ordered[-1], 3),
        "reference_baselines_ms": REFERENCE_BASELINES_MS,
    }
