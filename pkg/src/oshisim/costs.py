"""Calibrated per-packet processing costs and the charge ledger.

Node capacity is normalized to one unit per second, so a node's load under
a packet flow is rate times the per-packet cost of whatever that node does
to each packet.  The five default saturation targets pin the five cost
terms exactly; see :func:`calibrate`.
"""

from __future__ import annotations

from dataclasses import dataclass

#: measured-profile names used for saturation-rate queries
PROFILES = ("router_plain", "oshi_ip_plain", "oshi_ip_vxlan",
            "oshi_vll_vxlan", "oshi_ip_vpn")

DEFAULT_TARGETS: dict[str, float] = {
    "router_plain": 14000.0,
    "oshi_ip_plain": 12500.0,
    "oshi_ip_vxlan": 12000.0,
    "oshi_vll_vxlan": 13000.0,
    "oshi_ip_vpn": 3500.0,
}

CAPACITY = 1.0  # units per second per node


class CalibrationError(ValueError):
    """Targets demand a non-positive cost term."""


@dataclass(frozen=True)
class CostModel:
    c_base: float  # per packet, once per node
    c_ip: float    # one IP lookup-and-forward
    c_scs: float   # one switch pipeline traversal
    c_vx: float    # kernel tunnel encap plus decap, per packet per node
    c_vpn: float   # userspace tunnel analog of c_vx

    def profile_cost(self, profile: str) -> float:
        """Per-packet cost at a transit node running the named profile."""
        both_tunnel_sides = {"router_plain": 0.0, "oshi_ip_plain": 0.0,
                             "oshi_ip_vxlan": self.c_vx,
                             "oshi_vll_vxlan": self.c_vx,
                             "oshi_ip_vpn": self.c_vpn}
        if profile not in both_tunnel_sides:
            raise KeyError(f"unknown profile {profile!r}")
        tunnel = both_tunnel_sides[profile]
        if profile == "router_plain":
            return self.c_base + self.c_ip
        if profile == "oshi_vll_vxlan":
            return self.c_base + self.c_scs + tunnel
        return self.c_base + self.c_ip + 2 * self.c_scs + tunnel

    def saturation_rate(self, profile: str) -> float:
        return CAPACITY / self.profile_cost(profile)


def calibrate(targets: dict[str, float] | None = None) -> CostModel:
    """Solve the five-profile linear system for the cost terms.

    router_plain:   1/r = c_base + c_ip
    oshi_ip_plain:  1/r = c_base + c_ip + 2*c_scs
    oshi_ip_vxlan:  1/r = c_base + c_ip + 2*c_scs + c_vx
    oshi_vll_vxlan: 1/r = c_base + c_scs + c_vx
    oshi_ip_vpn:    1/r = c_base + c_ip + 2*c_scs + c_vpn
    """
    t = dict(DEFAULT_TARGETS)
    if targets:
        t.update(targets)
    missing = [p for p in PROFILES if p not in t or t[p] <= 0]
    if missing:
        raise CalibrationError(f"bad or missing targets: {missing}")
    inv = {p: 1.0 / t[p] for p in PROFILES}
    c_scs = (inv["oshi_ip_plain"] - inv["router_plain"]) / 2.0
    c_vx = inv["oshi_ip_vxlan"] - inv["oshi_ip_plain"]
    c_vpn = inv["oshi_ip_vpn"] - inv["oshi_ip_plain"]
    c_base = inv["oshi_vll_vxlan"] - c_scs - c_vx
    c_ip = inv["router_plain"] - c_base
    model = CostModel(c_base, c_ip, c_scs, c_vx, c_vpn)
    bad = [name for name in ("c_base", "c_ip", "c_scs", "c_vx", "c_vpn")
           if getattr(model, name) <= 0]
    if bad:
        raise CalibrationError(
            f"targets give non-positive cost terms: {', '.join(bad)}")
    return model


DEFAULT_MODEL = calibrate()


class CostLedger:
    """Per-node cumulative charge, with optional per-charge tracing."""

    def __init__(self, clock) -> None:
        self._clock = clock  # () -> current simulated time
        self.totals: dict[str, float] = {}
        self._trace: list[tuple[str, float, float]] | None = None

    def charge(self, node_id: str, units: float) -> None:
        self.totals[node_id] = self.totals.get(node_id, 0.0) + units
        if self._trace is not None:
            self._trace.append((node_id, units, self._clock()))

    def start_trace(self) -> None:
        self._trace = []

    def stop_trace(self) -> list[tuple[str, float, float]]:
        trace, self._trace = self._trace or [], None
        return trace

    def total(self, node_id: str) -> float:
        return self.totals.get(node_id, 0.0)
