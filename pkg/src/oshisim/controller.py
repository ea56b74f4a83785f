"""Centralized controller: discovery, route queries and the VLL pusher.

Everything the controller believes about links comes from its own probes,
never from deployment configuration.  All switch interaction rides the
in-band control channel as routed datagrams, so nothing here works until
IP routing has converged.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from ipaddress import IPv4Address
from typing import TYPE_CHECKING, Callable

from . import flowengine as fe
from .netmodel import (
    ETHERTYPE_PROBE,
    IPPROTO_CONTROL,
    RESERVED_VIDS,
    Ipv4Packet,
    decode_frame,
)
from .node import (
    PRIO_SBP,
    PRIO_VLL_CLASSIFY,
    OshiNode,
    TaggedToVll,
    UntaggedToVll,
    policy_entry_to_json,
)

if TYPE_CHECKING:
    from .sim import Simulation


class ControllerError(Exception):
    code = "ControllerError"


class NoPathError(ControllerError):
    code = "NoPath"


class TagExhaustedError(ControllerError):
    code = "TagExhausted"


class EndpointConflictError(ControllerError):
    code = "EndpointConflict"


class UnknownVllError(ControllerError):
    code = "UnknownVll"


class UnknownDpidError(ControllerError):
    code = "UnknownDpid"


LinkKey = tuple[tuple[str, int], tuple[str, int]]


def link_key(a: tuple[str, int], b: tuple[str, int]) -> LinkKey:
    return tuple(sorted((a, b)))  # type: ignore[return-value]


class TopologyView:
    """Discovered switches and adjacencies with last-seen stamps."""

    def __init__(self) -> None:
        self.switches: set[str] = set()
        self.links: dict[LinkKey, float] = {}

    def add_link(self, a: tuple[str, int], b: tuple[str, int], t: float) -> None:
        self.links[link_key(a, b)] = t

    def drop_port(self, node: str, port: int) -> None:
        gone = [k for k in self.links if (node, port) in k]
        for k in gone:
            del self.links[k]

    def neighbors(self, node: str) -> list[tuple[str, int, int]]:
        """(peer, own port, peer port) over discovered links, sorted."""
        out = []
        for (na, pa), (nb, pb) in self.links:
            if na == node:
                out.append((nb, pa, pb))
            elif nb == node:
                out.append((na, pb, pa))
        return sorted(out)

    def to_json(self) -> dict:
        links = []
        for (a, b), seen in sorted(self.links.items()):
            links.append({"a": {"node": a[0], "port": a[1]},
                          "b": {"node": b[0], "port": b[1]},
                          "last_seen": seen})
        return {"switches": sorted(self.switches), "links": links}


class TagAllocator:
    """Per-link vid pool; allocation and release are exact inverses."""

    def __init__(self) -> None:
        self.allocated: dict[LinkKey, set[int]] = {}
        self.reserved: dict[LinkKey, set[int]] = {}

    def reserve(self, key: LinkKey, vids: set[int]) -> None:
        self.reserved.setdefault(key, set(RESERVED_VIDS)).update(vids)

    def allocate(self, key: LinkKey) -> int:
        taken = self.allocated.setdefault(key, set())
        blocked = self.reserved.get(key, RESERVED_VIDS)
        for vid in range(2, 4095):
            if vid not in taken and vid not in blocked:
                taken.add(vid)
                return vid
        raise TagExhaustedError(f"no free vid on link {key}")

    def release(self, key: LinkKey, vid: int) -> None:
        self.allocated.get(key, set()).discard(vid)

    def snapshot(self) -> dict[LinkKey, frozenset[int]]:
        return {k: frozenset(v) for k, v in self.allocated.items() if v}


@dataclass
class VllEndpoint:
    node: str
    port: int
    vid: int | None = None

    def to_json(self) -> dict:
        d: dict = {"node": self.node, "port": self.port}
        if self.vid is not None:
            d["vid"] = self.vid
        return d

    @classmethod
    def from_json(cls, d: dict) -> "VllEndpoint":
        vid = d.get("vid")
        return cls(d["node"], int(d["port"]), int(vid) if vid is not None else None)


@dataclass
class VllDescriptor:
    vll_id: str
    end_a: VllEndpoint
    end_b: VllEndpoint
    path: list[str]
    link_keys: list[LinkKey]
    link_vids: list[int]
    cookie: int
    state: str = "Pending"  # Pending | Active | Failed
    error: str | None = None
    rule_nodes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "id": self.vll_id,
            "end_a": self.end_a.to_json(),
            "end_b": self.end_b.to_json(),
            "path": list(self.path),
            "link_vids": list(self.link_vids),
            "cookie": self.cookie,
            "state": self.state,
            "error": self.error,
        }


class Controller:
    """State machine on the event loop; one instance per deployment."""

    def __init__(self, sim: "Simulation", loopback: IPv4Address) -> None:
        self.sim = sim
        self.loopback = loopback
        self.host: OshiNode | None = None
        self.registered: dict[str, dict] = {}
        self.dpid_to_node: dict[int, str] = {}
        self.view = TopologyView()
        self.allocator = TagAllocator()
        self.vlls: dict[str, VllDescriptor] = {}
        self.bindings: dict[tuple[str, int, int | None], str] = {}
        self._pending: dict[int, Callable[[bool, object], None]] = {}
        self._req_seq = 0
        self._vll_seq = 0

    def attach(self, host: OshiNode) -> None:
        self.host = host
        host.controller = self

    # -- control channel ------------------------------------------------

    def _send(self, node_id: str, obj: dict) -> None:
        assert self.host is not None
        info = self.registered.get(node_id)
        dst = IPv4Address(info["loopback"]) if info else None
        if dst is None:
            raise UnknownDpidError(f"node {node_id} not registered")
        payload = json.dumps(obj, sort_keys=True).encode()
        self.host.originate_ip(
            Ipv4Packet(self.loopback, dst, 64, IPPROTO_CONTROL, payload))

    def send_cmd(self, node_id: str, op: str, args: dict,
                 cb: Callable[[bool, object], None] | None = None) -> int:
        self._req_seq += 1
        req = self._req_seq
        if cb is not None:
            self._pending[req] = cb
        self._send(node_id, {"kind": "cmd", "req": req, "op": op, "args": args})
        return req

    def receive(self, packet: Ipv4Packet) -> None:
        try:
            doc = json.loads(packet.payload.decode())
        except (UnicodeDecodeError, json.JSONDecodeError):
            return
        kind = doc.get("kind")
        if kind == "register":
            self._on_register(doc, packet.src)
        elif kind == "reply":
            cb = self._pending.pop(doc.get("req"), None)
            if cb is not None:
                cb(bool(doc.get("ok")), doc.get("result") or doc.get("error"))
        elif kind == "packet_in":
            self._on_packet_in(doc)
        elif kind == "port_status":
            self._on_port_status(doc)

    def _on_register(self, doc: dict, src: IPv4Address) -> None:
        node_id = doc["node"]
        first = node_id not in self.registered
        self.registered[node_id] = {
            "dpid": int(doc["dpid"]),
            "role": doc["role"],
            "loopback": doc["loopback"],
            "ports": list(doc["ports"]),
        }
        self.dpid_to_node[int(doc["dpid"])] = node_id
        self.view.switches.add(node_id)
        if first:
            self.sim.record("register", f"{node_id} dpid {doc['dpid']}")
        self._send(node_id, {"kind": "register_ack"})

    def _on_packet_in(self, doc: dict) -> None:
        node_id = self.dpid_to_node.get(int(doc["dpid"]))
        if node_id is None:
            return
        frame = decode_frame(bytes.fromhex(doc["data"]))
        if frame.ethertype != ETHERTYPE_PROBE:
            return
        probe = json.loads(frame.payload.decode())
        src_node = self.dpid_to_node.get(int(probe["dpid"]))
        if src_node is None:
            return
        self.view.add_link((src_node, int(probe["port"])),
                           (node_id, int(doc["in_port"])), self.sim.now)
        self.sim.record("link-discovered",
                        f"{src_node}:{probe['port']} <-> {node_id}:{doc['in_port']}")

    def _on_port_status(self, doc: dict) -> None:
        node_id = self.dpid_to_node.get(int(doc["dpid"]))
        if node_id is None:
            return
        port = int(doc["port"])
        if doc.get("up"):
            self.send_cmd(node_id, "probe_emit", {"port": port})
            return
        self.view.drop_port(node_id, port)
        for vll in self.vlls.values():
            if vll.state != "Active":
                continue
            if any((node_id, port) in k for k in vll.link_keys):
                vll.state = "Failed"
                vll.error = f"link at {node_id}:{port} went down"
                self.sim.record("vll-failed", vll.vll_id)

    # -- discovery --------------------------------------------------------

    def discover_topology(self) -> int:
        """Emit one probe per (switch, port); returns how many were sent."""
        sent = 0
        for node_id in sorted(self.registered):
            for port in self.registered[node_id]["ports"]:
                self.send_cmd(node_id, "probe_emit", {"port": port})
                sent += 1
        return sent

    # -- routing over the discovered graph ---------------------------------

    def get_route(self, src: str, dst: str) -> list[str]:
        """Minimum-hop node path; ties go to the smallest id sequence."""
        if src not in self.view.switches or dst not in self.view.switches:
            missing = src if src not in self.view.switches else dst
            raise NoPathError(f"unknown endpoint {missing}")
        best: dict[str, tuple[int, tuple[str, ...]]] = {}
        heap: list[tuple[int, tuple[str, ...]]] = [(0, (src,))]
        while heap:
            hops, path = heapq.heappop(heap)
            node = path[-1]
            if node in best and best[node] <= (hops, path):
                continue
            best[node] = (hops, path)
            if node == dst:
                return list(path)
            for peer, _, _ in self.view.neighbors(node):
                if peer not in path:
                    heapq.heappush(heap, (hops + 1, path + (peer,)))
        raise NoPathError(f"no route between {src} and {dst}")

    def _hop_ports(self, a: str, b: str) -> tuple[int, int]:
        pairs = sorted((pa, pb) for peer, pa, pb in self.view.neighbors(a)
                       if peer == b)
        if not pairs:
            raise NoPathError(f"no discovered link {a} - {b}")
        return pairs[0]

    # -- service provisioning ----------------------------------------------

    def push_vll(self, end_a: VllEndpoint, end_b: VllEndpoint) -> VllDescriptor:
        """Allocate tags, install both directions, drive state to Active."""
        for end in (end_a, end_b):
            info = self.registered.get(end.node)
            if info is None or info["role"] != "pe":
                raise EndpointConflictError(
                    f"endpoint {end.node} is not an access node")
            if any((end.node, end.port) in k for k in self.view.links):
                raise EndpointConflictError(
                    f"{end.node}:{end.port} carries a provider link")
            if end.vid is not None and end.vid in RESERVED_VIDS:
                raise EndpointConflictError(f"vid {end.vid} is reserved")
            slot = (end.node, end.port, end.vid)
            if slot in self.bindings:
                raise EndpointConflictError(
                    f"{end.node}:{end.port} vid {end.vid} already bound to "
                    f"{self.bindings[slot]}")
        if (end_a.node, end_a.port) == (end_b.node, end_b.port):
            raise EndpointConflictError("both endpoints on the same port")

        path = self.get_route(end_a.node, end_b.node)
        up_ports: list[int] = []
        down_ports: list[int] = []
        keys: list[LinkKey] = []
        for i in range(len(path) - 1):
            out_p, in_p = self._hop_ports(path[i], path[i + 1])
            up_ports.append(out_p)
            down_ports.append(in_p)
            keys.append(link_key((path[i], out_p), (path[i + 1], in_p)))

        vids: list[int] = []
        try:
            for key in keys:
                vids.append(self.allocator.allocate(key))
        except TagExhaustedError:
            for key, vid in zip(keys, vids):
                self.allocator.release(key, vid)
            raise

        self._vll_seq += 1
        vll_id = f"vll{self._vll_seq}"
        cookie = 0x1000 + self._vll_seq
        vll = VllDescriptor(vll_id, end_a, end_b, path, keys, vids, cookie)
        self.vlls[vll_id] = vll
        self.bindings[(end_a.node, end_a.port, end_a.vid)] = vll_id
        self.bindings[(end_b.node, end_b.port, end_b.vid)] = vll_id

        plan = self._build_rules(vll, up_ports, down_ports)
        vll.rule_nodes = sorted({node for node, _ in plan})
        outstanding = {"n": len(plan) + 4, "failed": None}

        def done(ok: bool, result: object) -> None:
            if not ok and outstanding["failed"] is None:
                outstanding["failed"] = str(result)
            outstanding["n"] -= 1
            if outstanding["n"] == 0:
                if outstanding["failed"] is None:
                    vll.state = "Active"
                    self.sim.record("vll-active", vll_id)
                else:
                    self._rollback(vll, outstanding["failed"])

        # customer-facing sockets first, then forwarding, then the bindings
        self.send_cmd(end_a.node, "port_ensure", {"port": end_a.port}, done)
        self.send_cmd(end_b.node, "port_ensure", {"port": end_b.port}, done)
        for node_id, entry in plan:
            self.send_cmd(node_id, "flow_add",
                          {"entry": fe.entry_to_json(entry)}, done)
        self.send_cmd(end_a.node, "policy_add",
                      {"port": end_a.port,
                       "entry": policy_entry_to_json(_endpoint_policy(end_a, vll_id))},
                      done)
        self.send_cmd(end_b.node, "policy_add",
                      {"port": end_b.port,
                       "entry": policy_entry_to_json(_endpoint_policy(end_b, vll_id))},
                      done)
        return vll

    def _build_rules(self, vll: VllDescriptor, up: list[int],
                     down: list[int]) -> list[tuple[str, fe.FlowEntry]]:
        path, vids = vll.path, vll.link_vids
        k = len(path) - 1
        plan: list[tuple[str, fe.FlowEntry]] = []

        def classify(end: VllEndpoint, first_vid: int) -> fe.FlowEntry:
            if end.vid is None:
                match = fe.FlowMatch(in_port=end.port, vlan_vid=fe.VID_ABSENT)
                actions: tuple[fe.FlowAction, ...] = (
                    fe.PushVlan(first_vid), fe.GotoTable(1))
            else:
                match = fe.FlowMatch(in_port=end.port, vlan_vid=end.vid)
                actions = (fe.SetVlan(first_vid), fe.GotoTable(1))
            return fe.FlowEntry(0, PRIO_VLL_CLASSIFY, match, actions, vll.cookie)

        def egress_actions(end: VllEndpoint) -> tuple[fe.FlowAction, ...]:
            if end.vid is None:
                return (fe.PopVlan(), fe.Output(end.port))
            return (fe.SetVlan(end.vid), fe.Output(end.port))

        # direction end_a -> end_b
        plan.append((path[0], classify(vll.end_a, vids[0])))
        plan.append((path[0], fe.FlowEntry(
            1, PRIO_SBP, fe.FlowMatch(in_port=vll.end_a.port, vlan_vid=vids[0]),
            (fe.Output(up[0]),), vll.cookie)))
        for i in range(1, k):
            plan.append((path[i], fe.FlowEntry(
                1, PRIO_SBP, fe.FlowMatch(in_port=down[i - 1], vlan_vid=vids[i - 1]),
                (fe.SetVlan(vids[i]), fe.Output(up[i])), vll.cookie)))
        plan.append((path[k], fe.FlowEntry(
            1, PRIO_SBP, fe.FlowMatch(in_port=down[k - 1], vlan_vid=vids[k - 1]),
            egress_actions(vll.end_b), vll.cookie)))

        # direction end_b -> end_a
        plan.append((path[k], classify(vll.end_b, vids[k - 1])))
        plan.append((path[k], fe.FlowEntry(
            1, PRIO_SBP, fe.FlowMatch(in_port=vll.end_b.port, vlan_vid=vids[k - 1]),
            (fe.Output(down[k - 1]),), vll.cookie)))
        for i in range(k - 1, 0, -1):
            plan.append((path[i], fe.FlowEntry(
                1, PRIO_SBP, fe.FlowMatch(in_port=up[i], vlan_vid=vids[i]),
                (fe.SetVlan(vids[i - 1]), fe.Output(down[i - 1])), vll.cookie)))
        plan.append((path[0], fe.FlowEntry(
            1, PRIO_SBP, fe.FlowMatch(in_port=up[0], vlan_vid=vids[0]),
            egress_actions(vll.end_a), vll.cookie)))
        return plan

    def _rollback(self, vll: VllDescriptor, error: str) -> None:
        for node_id in vll.rule_nodes:
            self.send_cmd(node_id, "flow_del", {"cookie": vll.cookie})
        self._release_vll(vll)
        vll.state = "Failed"
        vll.error = error
        self.sim.record("vll-failed", f"{vll.vll_id}: {error}")

    def _release_vll(self, vll: VllDescriptor) -> None:
        for key, vid in zip(vll.link_keys, vll.link_vids):
            self.allocator.release(key, vid)
        for end in (vll.end_a, vll.end_b):
            self.bindings.pop((end.node, end.port, end.vid), None)

    def delete_vll(self, vll_id: str) -> dict:
        """Tear down all rules and release every allocated vid."""
        vll = self.vlls.get(vll_id)
        if vll is None:
            raise UnknownVllError(f"unknown vll {vll_id}")
        for node_id in vll.rule_nodes:
            self.send_cmd(node_id, "flow_del", {"cookie": vll.cookie})
        for end in (vll.end_a, vll.end_b):
            self.send_cmd(end.node, "policy_del",
                          {"port": end.port,
                           "entry": policy_entry_to_json(
                               _endpoint_policy(end, vll_id))})
        self._release_vll(vll)
        del self.vlls[vll_id]
        self.sim.record("vll-deleted", vll_id)
        return {"id": vll_id, "released_vids": list(vll.link_vids),
                "nodes": vll.rule_nodes}

    def static_flow_push(self, dpid: int, entry_json: dict,
                         cb: Callable[[bool, object], None] | None = None) -> int:
        node_id = self.dpid_to_node.get(dpid)
        if node_id is None:
            raise UnknownDpidError(f"unknown dpid {dpid}")
        fe.entry_from_json(entry_json)  # shape check before shipping
        return self.send_cmd(node_id, "flow_add", {"entry": entry_json}, cb)

    def audit_vid_disjointness(self) -> bool:
        """No two active services may share a vid on any link."""
        per_link: dict[LinkKey, set[int]] = {}
        for vll in self.vlls.values():
            if vll.state == "Failed":
                continue
            for key, vid in zip(vll.link_keys, vll.link_vids):
                seen = per_link.setdefault(key, set())
                if vid in seen:
                    return False
                seen.add(vid)
        return True


def _endpoint_policy(end: VllEndpoint, vll_id: str):
    if end.vid is None:
        return UntaggedToVll(vll_id)
    return TaggedToVll(end.vid, vll_id)
