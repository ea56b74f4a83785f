"""Traffic generation, the sampling protocol and the four experiments.

Loads are computed from real packet traces: the first datagram of a flow
is forwarded hop by hop through the deployed data plane to learn exactly
what each node charges for it, then the seeded arrival series prices every
window of the run.  Twenty polls two simulated seconds apart, the first
ten discarded, averaged per run; mean and deviation over twenty runs.
"""

from __future__ import annotations

import json
import statistics
from bisect import bisect_left
from dataclasses import dataclass, field
from random import Random

from .costs import (
    CAPACITY,
    DEFAULT_MODEL,
    DEFAULT_TARGETS,
    PROFILES,
    CalibrationError,
    CostModel,
    calibrate,
)
from .node import NodeRole
from .overlay import MTU, TUNNEL_OVERHEAD, TunnelKind
from .topo import Coexistence, Deployment, LinkSpec, NodeDecl, TopologyDoc, VllDecl, deploy

__all__ = [
    "CalibrationError", "CostModel", "DEFAULT_MODEL", "DEFAULT_TARGETS",
    "PROFILES", "RunStats", "TrafficSpec", "calibrate", "export_stats",
    "import_stats", "run_throughput_experiment", "run_udp_experiment",
    "stats_json", "run_experiment", "chain_doc",
]

SAMPLES_PER_RUN = 20
SAMPLE_INTERVAL = 2.0
DISCARD_SAMPLES = 10
DEFAULT_RUNS = 20
DEFAULT_RATES = (500, 1000, 1500, 2000, 2500)

#: reference hardware measurements for the throughput pair; context only
THROUGHPUT_REFERENCE_MBPS = {"vll": 1555.0, "ip": 1150.0}


@dataclass(frozen=True)
class TrafficSpec:
    src: str
    dst: str
    kind: str  # "udp-flow" | "tcp-greedy"
    rate: float  # packets per second
    size: int = 1000  # bytes per datagram
    duration: float = 40.0  # simulated seconds

    def __post_init__(self) -> None:
        if self.kind not in ("udp-flow", "tcp-greedy"):
            raise ValueError(f"unknown traffic kind {self.kind!r}")
        if self.rate <= 0:
            raise ValueError("rate must be > 0")
        if not 20 <= self.size <= MTU - TUNNEL_OVERHEAD - 18:
            raise ValueError(f"size {self.size} outside the MTU budget")
        if self.duration < SAMPLES_PER_RUN * SAMPLE_INTERVAL:
            raise ValueError(
                f"duration must cover {SAMPLES_PER_RUN} samples at "
                f"{SAMPLE_INTERVAL}s")


@dataclass(frozen=True)
class Sample:
    node: str
    t: float
    cpu: float


@dataclass
class RunResult:
    samples: list[Sample]
    load: float


@dataclass
class RunStats:
    runs: list[RunResult]
    avg: float
    dev: float
    meta: dict = field(default_factory=dict)


def _arrival_times(rate: float, duration: float, jitter: float,
                   rng: Random) -> list[float]:
    """Seeded slotted generator: slot centers displaced by +-jitter/2 slots."""
    n = round(rate * duration)
    if jitter == 0.0:
        return [(k + 0.5) / rate for k in range(n)]
    times = [(k + 0.5 + (rng.random() - 0.5) * jitter) / rate
             for k in range(n)]
    times.sort()
    return times


def run_udp_experiment(deployment: Deployment, spec: TrafficSpec,
                       model: CostModel | None = None,
                       runs: int = DEFAULT_RUNS,
                       monitored: list[str] | None = None,
                       jitter: float = 2.0, seed: int = 0,
                       run_seeds: list | None = None) -> RunStats:
    """Per-node CPU loads for a constant packet flow, sampled and averaged."""
    model = model or deployment.model
    profile = deployment.trace_udp(spec.src, spec.dst, spec.size)
    units_of = {node: units for node, units, _ in profile}
    offset_of = {node: off for node, _, off in profile}
    if monitored is None:
        monitored = [n for n, _, _ in profile
                     if n in deployment.nodes
                     and deployment.nodes[n].role in (NodeRole.ACCESS,
                                                      NodeRole.CORE,
                                                      NodeRole.ROUTER)]
        if not monitored:
            monitored = [n for n, _, _ in profile if n not in (spec.src, spec.dst)]
    unknown = [n for n in monitored if n not in units_of]
    if unknown:
        raise ValueError(f"monitored nodes not on the path: {unknown}")

    results: list[RunResult] = []
    for r in range(runs):
        run_seed = run_seeds[r] if run_seeds is not None else f"{seed}:{r}"
        rng = Random(f"udp:{run_seed}")
        times = _arrival_times(spec.rate, spec.duration, jitter, rng)
        samples: list[Sample] = []
        per_node_means: list[float] = []
        for node in sorted(monitored):
            units = units_of[node]
            off = offset_of[node]
            cpus: list[float] = []
            for k in range(1, SAMPLES_PER_RUN + 1):
                lo = (k - 1) * SAMPLE_INTERVAL - off
                hi = k * SAMPLE_INTERVAL - off
                count = bisect_left(times, hi) - bisect_left(times, lo)
                cpus.append(count * units / SAMPLE_INTERVAL / CAPACITY)
            samples.extend(Sample(node, k * SAMPLE_INTERVAL, cpu)
                           for k, cpu in enumerate(cpus, start=1))
            per_node_means.append(
                statistics.fmean(cpus[DISCARD_SAMPLES:]))
        for node, units, _ in profile:
            deployment.ledger.charge(node, units * len(times))
        samples.sort(key=lambda s: (s.t, s.node))
        results.append(RunResult(samples, statistics.fmean(per_node_means)))

    loads = [r.load for r in results]
    avg = statistics.fmean(loads)
    dev = statistics.pstdev(loads)
    meta = {
        "spec": {"src": spec.src, "dst": spec.dst, "kind": spec.kind,
                 "rate": spec.rate, "size": spec.size,
                 "duration": spec.duration},
        "monitored": sorted(monitored),
        "runs": runs,
        "seed": seed,
        "jitter": jitter,
        "profile": [{"node": n, "units": u, "offset": o}
                    for n, u, o in profile],
    }
    return RunStats(results, avg, dev, meta)


def analytic_load(units_per_packet: float, rate: float) -> float:
    return units_per_packet * rate / CAPACITY


# -- stats serialization -----------------------------------------------------

def export_stats(stats: RunStats) -> dict:
    return {
        "runs": [
            {"load": r.load,
             "samples": [{"node": s.node, "t": s.t, "cpu": s.cpu}
                         for s in r.samples]}
            for r in stats.runs],
        "avg": stats.avg,
        "dev": stats.dev,
        "meta": stats.meta,
    }


def stats_json(stats: RunStats) -> str:
    return json.dumps(export_stats(stats), sort_keys=True, indent=2) + "\n"


def import_stats(doc: dict) -> RunStats:
    runs = [RunResult([Sample(s["node"], s["t"], s["cpu"])
                       for s in r["samples"]], r["load"])
            for r in doc["runs"]]
    return RunStats(runs, doc["avg"], doc["dev"], dict(doc.get("meta", {})))


# -- shared-budget throughput --------------------------------------------------

def run_throughput_experiment(deployment: Deployment, vll_id: str,
                              model: CostModel | None = None,
                              budget: float = 1.0, size: int = 1000) -> dict:
    """Greedy-flow throughput under one shared CPU budget, service vs IP.

    Both figures are computed over the same provisioned path; the service
    skips the IP engine and one pipeline traversal per node, so it always
    comes out ahead.
    """
    model = model or deployment.model
    assert deployment.controller is not None
    vll = deployment.controller.vlls.get(vll_id)
    if vll is None:
        raise KeyError(f"unknown vll {vll_id}")

    def tunnel_units(node: str, port: int) -> float:
        tun = deployment.nodes[node].tunnels.get(port)
        if tun is None:
            return 0.0
        return (model.c_vpn if tun.kind is TunnelKind.USERSPACE_VPN
                else model.c_vx) / 2.0

    sides: dict[str, float] = {n: 0.0 for n in vll.path}
    for key in vll.link_keys:
        for node, port in key:
            sides[node] += tunnel_units(node, port)
    sides[vll.end_a.node] += tunnel_units(vll.end_a.node, vll.end_a.port)
    sides[vll.end_b.node] += tunnel_units(vll.end_b.node, vll.end_b.port)

    vll_cost = sum(model.c_base + model.c_scs + sides[n] for n in vll.path)
    ip_cost = sum(model.c_base + model.c_ip + 2 * model.c_scs + sides[n]
                  for n in vll.path)
    vll_pps = budget / vll_cost
    ip_pps = budget / ip_cost
    to_mbps = size * 8 / 1e6
    return {
        "path": list(vll.path),
        "size": size,
        "budget": budget,
        "vll_pps": vll_pps,
        "ip_pps": ip_pps,
        "vll_mbps": vll_pps * to_mbps,
        "ip_mbps": ip_pps * to_mbps,
        "reference_mbps": dict(THROUGHPUT_REFERENCE_MBPS),
        "reference_note": "reference hardware figures; ordering is the "
                          "target, the gap is not",
    }


# -- experiment fixtures --------------------------------------------------------

def chain_doc(core_role: str = "pe", overlay: str = "none",
              vll: bool = False,
              coexistence: Coexistence | None = None) -> TopologyDoc:
    """ce1 - n1 - n2 - ce2, every link carrying the same overlay kind."""
    nodes = [NodeDecl("ce1", "ce"), NodeDecl("n1", core_role),
             NodeDecl("n2", core_role), NodeDecl("ce2", "ce")]
    links = [
        LinkSpec("lk-a", ("n1", 1), ("ce1", 1), 1, 0.001, None, overlay),
        LinkSpec("lk-core", ("n1", 2), ("n2", 2), 1, 0.001, None, overlay),
        LinkSpec("lk-b", ("n2", 1), ("ce2", 1), 1, 0.001, None, overlay),
    ]
    vlls = []
    if vll:
        vlls.append(VllDecl("v1", {"node": "n1", "port": 1},
                            {"node": "n2", "port": 1}))
    return TopologyDoc(coexistence or Coexistence("untagged"),
                       nodes, links, vlls)


def _series(doc: TopologyDoc, rates, runs: int, seed: int,
            model: CostModel, label: str) -> dict:
    deployment = deploy(doc, seed=seed, model=model)
    out = {}
    for rate in rates:
        spec = TrafficSpec("ce1", "ce2", "udp-flow", float(rate), 1000, 40.0)
        stats = run_udp_experiment(
            deployment, spec, model, runs=runs,
            monitored=["n1", "n2"], seed=seed + rate)
        out[str(rate)] = export_stats(stats)
    return out


def _avg_at(series: dict, rate) -> float:
    return series[str(rate)]["avg"]


def experiment_a(seed: int = 0, rates=DEFAULT_RATES, runs: int = DEFAULT_RUNS,
                 model: CostModel | None = None) -> dict:
    """Hybrid-node IP forwarding against a plain router, no tunnels."""
    model = model or DEFAULT_MODEL
    series = {
        "router_ip": _series(chain_doc("router", "none"), rates, runs, seed,
                             model, "router_ip"),
        "oshi_ip": _series(chain_doc("pe", "none"), rates, runs, seed,
                           model, "oshi_ip"),
    }
    top = max(rates)
    return {
        "experiment": "a",
        "saturation_pps": {
            "router_plain": model.saturation_rate("router_plain"),
            "oshi_ip_plain": model.saturation_rate("oshi_ip_plain"),
        },
        "series": series,
        "summary": {
            "oshi_penalty_at_top_rate":
                _avg_at(series["oshi_ip"], top)
                / _avg_at(series["router_ip"], top) - 1.0,
            "ordering_ok":
                _avg_at(series["oshi_ip"], top)
                > _avg_at(series["router_ip"], top),
        },
    }


def experiment_b(seed: int = 0, rates=DEFAULT_RATES, runs: int = DEFAULT_RUNS,
                 model: CostModel | None = None) -> dict:
    """Tunneling overhead: plain against kernel and userspace overlays."""
    model = model or DEFAULT_MODEL
    series = {
        "plain": _series(chain_doc("pe", "none"), rates, runs, seed, model,
                         "plain"),
        "vxlan": _series(chain_doc("pe", "vxlan"), rates, runs, seed, model,
                         "vxlan"),
        "vpn": _series(chain_doc("pe", "vpn"), rates, runs, seed, model,
                       "vpn"),
    }
    plain_rate = model.saturation_rate("oshi_ip_plain")
    vxlan_rate = model.saturation_rate("oshi_ip_vxlan")
    vpn_rate = model.saturation_rate("oshi_ip_vpn")
    return {
        "experiment": "b",
        "saturation_pps": {
            "oshi_ip_plain": plain_rate,
            "oshi_ip_vxlan": vxlan_rate,
            "oshi_ip_vpn": vpn_rate,
        },
        "series": series,
        "summary": {
            "vxlan_rate_penalty": 1.0 - vxlan_rate / plain_rate,
            "vpn_slowdown": plain_rate / vpn_rate,
            "vpn_at_least_3_5x_slower": vpn_rate <= plain_rate / 3.5,
            "vxlan_penalty_within_10pct": vxlan_rate >= 0.9 * plain_rate,
        },
    }


def experiment_c(seed: int = 0, rates=DEFAULT_RATES, runs: int = DEFAULT_RUNS,
                 model: CostModel | None = None) -> dict:
    """Forwarding flavors over kernel tunnels: plain IP, hybrid IP, service."""
    model = model or DEFAULT_MODEL
    series = {
        "router_ip": _series(chain_doc("router", "vxlan"), rates, runs, seed,
                             model, "router_ip"),
        "oshi_ip": _series(chain_doc("pe", "vxlan"), rates, runs, seed,
                           model, "oshi_ip"),
        "oshi_vll": _series(chain_doc("pe", "vxlan", vll=True), rates, runs,
                            seed, model, "oshi_vll"),
    }
    top = max(rates)
    return {
        "experiment": "c",
        "saturation_pps": {
            "router_ip_vxlan": model.saturation_rate("oshi_ip_vxlan"),
            "oshi_ip_vxlan": model.saturation_rate("oshi_ip_vxlan"),
            "oshi_vll_vxlan": model.saturation_rate("oshi_vll_vxlan"),
        },
        "series": series,
        "summary": {
            "vll_avg_at_top_rate": _avg_at(series["oshi_vll"], top),
            "ip_avg_at_top_rate": _avg_at(series["oshi_ip"], top),
            "vll_below_ip": _avg_at(series["oshi_vll"], top)
                            < _avg_at(series["oshi_ip"], top),
            "vll_gap_pps": model.saturation_rate("oshi_vll_vxlan")
                           - model.saturation_rate("oshi_ip_vxlan"),
        },
    }


def experiment_d(seed: int = 0, model: CostModel | None = None,
                 doc: TopologyDoc | None = None) -> dict:
    """Shared-budget greedy throughput on the bundled example topology."""
    model = model or DEFAULT_MODEL
    if doc is None:
        doc = bundled_example()
    deployment = deploy(doc, seed=seed, model=model)
    assert deployment.controller is not None
    vll_ids = sorted(deployment.controller.vlls)
    if not vll_ids:
        raise ValueError("experiment d needs a topology with a declared vll")
    result = run_throughput_experiment(deployment, vll_ids[0], model)
    result["experiment"] = "d"
    result["vll_faster"] = result["vll_mbps"] > result["ip_mbps"]
    return result


def run_experiment(letter: str, seed: int = 0, rates=None,
                   runs: int = DEFAULT_RUNS,
                   model: CostModel | None = None) -> dict:
    rates = tuple(rates) if rates else DEFAULT_RATES
    if letter == "a":
        return experiment_a(seed, rates, runs, model)
    if letter == "b":
        return experiment_b(seed, rates, runs, model)
    if letter == "c":
        return experiment_c(seed, rates, runs, model)
    if letter == "d":
        return experiment_d(seed, model)
    raise ValueError(f"unknown experiment {letter!r}")


def bundled_example() -> TopologyDoc:
    """The packaged ~30 node example document."""
    from importlib.resources import files

    from .topo import parse_topology
    text = files("oshisim.data").joinpath("example30.json").read_text()
    return parse_topology(text)
