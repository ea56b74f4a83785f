"""Topology files, synthetic generation and the one-shot deployer.

A validated document plus a seed is everything a deployment needs: node
construction, addressing, routing, discovery and pre-declared services all
happen without further input, and the same inputs replay to the same
event log.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Interface, IPv4Network

import networkx as nx

from .controller import Controller, ControllerError, VllDescriptor, VllEndpoint, link_key
from .costs import DEFAULT_MODEL, CostLedger, CostModel
from .netmodel import (
    EthernetFrame,
    Ipv4Packet,
    LinkSpec,
    decode_frame,
    encode_frame,
    node_mac,
)
from .node import (
    Coexistence,
    IfaceConfig,
    NodeConfig,
    NodeRole,
    OshiNode,
    TunnelConfig,
    UntaggedToIp,
    node_bootstrap,
)
from .overlay import TunnelKind
from .routing import StaticRoute
from .sim import Simulation

SCHEMA_VERSION = 1
ROLE_TOKENS = {"pe": NodeRole.ACCESS, "cr": NodeRole.CORE,
               "router": NodeRole.ROUTER, "ce": NodeRole.CUSTOMER_EDGE}

LINK_POOL = int(IPv4Address("10.0.0.0"))
LOOPBACK_POOL = int(IPv4Address("172.16.0.0"))
CONTROLLER_IP = IPv4Address("172.16.255.254")
UNDERLAY_POOL = int(IPv4Address("192.168.0.0"))

ECHO_PROTO = 1


class SchemaError(ValueError):
    """Document rejected; .violations lists (path, message) pairs."""

    def __init__(self, violations: list[tuple[str, str]]) -> None:
        self.violations = violations
        lines = "; ".join(f"{p}: {m}" for p, m in violations)
        super().__init__(f"invalid topology document: {lines}")


class DeployError(RuntimeError):
    pass


@dataclass
class NodeDecl:
    node_id: str
    role: str
    reserved_vids: list[int] = field(default_factory=list)


@dataclass
class VllDecl:
    vll_id: str
    end_a: dict
    end_b: dict


@dataclass
class TopologyDoc:
    coexistence: Coexistence
    nodes: list[NodeDecl]
    links: list[LinkSpec]
    vlls: list[VllDecl] = field(default_factory=list)
    shards: dict[str, int] = field(default_factory=dict)
    x_ui: dict = field(default_factory=dict)
    version: int = SCHEMA_VERSION

    def node(self, node_id: str) -> NodeDecl:
        return next(n for n in self.nodes if n.node_id == node_id)

    def to_dict(self) -> dict:
        coex: dict = {"mode": self.coexistence.mode}
        if self.coexistence.ip_vid is not None:
            coex["ip_vid"] = self.coexistence.ip_vid
        doc: dict = {
            "version": self.version,
            "coexistence": coex,
            "nodes": [
                {"id": n.node_id, "role": n.role,
                 **({"reserved_vids": n.reserved_vids} if n.reserved_vids else {})}
                for n in self.nodes],
            "links": [
                {"id": l.link_id,
                 "a": {"node": l.a[0], "port": l.a[1]},
                 "b": {"node": l.b[0], "port": l.b[1]},
                 "cost": l.cost, "delay": l.delay, "overlay": l.overlay,
                 **({"capacity_pps": l.capacity_pps} if l.capacity_pps else {})}
                for l in self.links],
            "vlls": [{"id": v.vll_id, "end_a": v.end_a, "end_b": v.end_b}
                     for v in self.vlls],
        }
        if self.shards:
            doc["shards"] = self.shards
        if self.x_ui:
            doc["x-ui"] = self.x_ui
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _endpoint(obj, path: str, bad: list) -> tuple[str, int]:
    if not isinstance(obj, dict) or "node" not in obj or "port" not in obj:
        bad.append((path, "endpoint needs node and port"))
        return ("?", 0)
    try:
        port = int(obj["port"])
    except (TypeError, ValueError):
        bad.append((path, f"bad port {obj['port']!r}"))
        return (str(obj["node"]), 0)
    if not 1 <= port < 100:
        bad.append((path, f"port {port} outside 1..99"))
    return (str(obj["node"]), port)


def parse_topology(source: str | dict) -> TopologyDoc:
    """Validate a JSON document; collects every violation before failing."""
    if isinstance(source, str):
        try:
            raw = json.loads(source)
        except json.JSONDecodeError as exc:
            raise SchemaError([("$", f"not valid JSON: {exc}")]) from exc
    else:
        raw = source
    bad: list[tuple[str, str]] = []
    if not isinstance(raw, dict):
        raise SchemaError([("$", "document must be an object")])
    if raw.get("version") != SCHEMA_VERSION:
        bad.append(("version", f"expected {SCHEMA_VERSION}, got {raw.get('version')!r}"))

    coex_raw = raw.get("coexistence", {"mode": "untagged"})
    try:
        coexistence = Coexistence(coex_raw.get("mode", "untagged"),
                                  coex_raw.get("ip_vid"))
    except (ValueError, AttributeError) as exc:
        bad.append(("coexistence", str(exc)))
        coexistence = Coexistence("untagged")

    nodes: list[NodeDecl] = []
    seen_ids: set[str] = set()
    roles: dict[str, str] = {}
    for i, n in enumerate(raw.get("nodes", [])):
        path = f"nodes[{i}]"
        nid = str(n.get("id", ""))
        if not nid:
            bad.append((path, "missing id"))
            continue
        if nid in seen_ids:
            bad.append((path, f"duplicate id {nid!r}"))
        seen_ids.add(nid)
        role = n.get("role", "")
        if role not in ROLE_TOKENS:
            bad.append((path, f"unknown role {role!r}"))
        roles[nid] = role
        vids = n.get("reserved_vids", [])
        if not all(isinstance(v, int) and 0 <= v <= 4095 for v in vids):
            bad.append((path, "reserved_vids must be vids"))
        nodes.append(NodeDecl(nid, role, list(vids)))
    if not nodes:
        bad.append(("nodes", "at least one node required"))

    links: list[LinkSpec] = []
    seen_link_ids: set[str] = set()
    used_ports: set[tuple[str, int]] = set()
    for i, l in enumerate(raw.get("links", [])):
        path = f"links[{i}]"
        lid = str(l.get("id", f"l{i}"))
        if lid in seen_link_ids:
            bad.append((path, f"duplicate link id {lid!r}"))
        seen_link_ids.add(lid)
        a = _endpoint(l.get("a"), f"{path}.a", bad)
        b = _endpoint(l.get("b"), f"{path}.b", bad)
        for end, side in ((a, "a"), (b, "b")):
            if end[0] not in seen_ids:
                bad.append((f"{path}.{side}", f"link {lid}: unknown node {end[0]!r}"))
            elif end in used_ports:
                bad.append((f"{path}.{side}", f"link {lid}: port {end[0]}:{end[1]} reused"))
            used_ports.add(end)
        if roles.get(a[0]) == "ce" and roles.get(b[0]) == "ce":
            bad.append((path, f"link {lid}: CE-CE links are not allowed"))
        for end in (a, b):
            if roles.get(end[0]) == "ce":
                other = b if end == a else a
                if roles.get(other[0]) not in ("pe", None):
                    bad.append((path, f"link {lid}: CE {end[0]} must attach to a PE"))
        try:
            links.append(LinkSpec(lid, a, b, int(l.get("cost", 1)),
                                  float(l.get("delay", 0.001)),
                                  l.get("capacity_pps"),
                                  l.get("overlay", "none")))
        except (ValueError, KeyError) as exc:
            bad.append((path, str(exc)))

    vlls: list[VllDecl] = []
    seen_vll_ids: set[str] = set()
    for i, v in enumerate(raw.get("vlls", [])):
        path = f"vlls[{i}]"
        vid = str(v.get("id", f"v{i}"))
        if vid in seen_vll_ids:
            bad.append((path, f"duplicate vll id {vid!r}"))
        seen_vll_ids.add(vid)
        for side in ("end_a", "end_b"):
            end = _endpoint(v.get(side), f"{path}.{side}", bad)
            if end[0] not in seen_ids:
                bad.append((f"{path}.{side}", f"unknown node {end[0]!r}"))
            elif roles.get(end[0]) != "pe":
                bad.append((f"{path}.{side}", f"vll endpoint {end[0]} must be a PE"))
        vlls.append(VllDecl(vid, dict(v.get("end_a", {})), dict(v.get("end_b", {}))))

    shards = raw.get("shards", {})
    if shards:
        for k, v in shards.items():
            if k not in seen_ids:
                bad.append(("shards", f"unknown node {k!r}"))
            if not isinstance(v, int) or v < 0:
                bad.append(("shards", f"bad shard {v!r} for {k!r}"))

    if bad:
        raise SchemaError(bad)
    return TopologyDoc(coexistence, nodes, links, vlls, dict(shards),
                       dict(raw.get("x-ui", {})))


# -- synthetic generation ---------------------------------------------------

GENERATOR_MODELS = ("erdos-renyi", "er", "barabasi-albert", "ba", "waxman")


def generate_topology(model: str, n: int, seed: int, pe_fraction: float = 0.4,
                      p: float = 0.3, m: int = 2, alpha: float = 0.4,
                      beta: float = 0.6, coexistence: Coexistence | None = None,
                      overlay: str = "none") -> TopologyDoc:
    """Connected random provider graph with one customer edge per PE."""
    if n < 2:
        raise ValueError("need at least 2 nodes")
    if model not in GENERATOR_MODELS:
        raise ValueError(f"unknown model {model!r}")
    if model in ("erdos-renyi", "er") and p <= 0:
        raise ValueError("erdos-renyi needs p > 0")
    graph = None
    for attempt in range(64):
        sub_seed = seed + attempt
        if model in ("erdos-renyi", "er"):
            g = nx.gnp_random_graph(n, p, seed=sub_seed)
        elif model in ("barabasi-albert", "ba"):
            g = nx.barabasi_albert_graph(n, m, seed=sub_seed)
        else:
            g = nx.waxman_graph(n, beta=beta, alpha=alpha, seed=sub_seed)
        if nx.is_connected(g):
            graph = g
            break
    if graph is None:
        raise ValueError(f"no connected graph for {model} after 64 attempts")

    import random as _random
    rng = _random.Random(f"topogen:{seed}")
    core_ids = sorted(graph.nodes())
    n_pe = max(1, round(pe_fraction * n))
    pe_set = set(rng.sample(core_ids, n_pe))

    width = len(str(n))
    names = {i: (f"pe{i:0{width}d}" if i in pe_set else f"cr{i:0{width}d}")
             for i in core_ids}
    nodes = [NodeDecl(names[i], "pe" if i in pe_set else "cr")
             for i in core_ids]
    ports: dict[str, int] = {names[i]: 0 for i in core_ids}

    def next_port(nid: str) -> int:
        ports[nid] += 1
        return ports[nid]

    links: list[LinkSpec] = []
    for k, (u, v) in enumerate(sorted(graph.edges())):
        a, b = names[u], names[v]
        links.append(LinkSpec(f"l{k:03d}", (a, next_port(a)),
                              (b, next_port(b)), 1, 0.001, None, overlay))
    for i in sorted(pe_set):
        ce = f"ce{i:0{width}d}"
        nodes.append(NodeDecl(ce, "ce"))
        ports[ce] = 0
        pe = names[i]
        links.append(LinkSpec(f"lce{i:03d}", (pe, next_port(pe)),
                              (ce, next_port(ce)), 1, 0.001, None, overlay))
    return TopologyDoc(coexistence or Coexistence("untagged"), nodes, links)


# -- address planning -------------------------------------------------------

@dataclass
class AddressPlan:
    loopbacks: dict[str, IPv4Address]
    link_nets: dict[str, IPv4Network]       # link id -> /30 (routed links)
    link_addr: dict[tuple[str, str], IPv4Interface]  # (link id, node) -> addr
    vll_pair_nets: dict[str, IPv4Network]   # vll id -> shared customer /30
    controller: IPv4Address = CONTROLLER_IP

    def audit_disjoint(self) -> bool:
        nets = list(self.link_nets.values()) + list(self.vll_pair_nets.values())
        nets += [IPv4Network(f"{a}/32") for a in self.loopbacks.values()]
        nets.append(IPv4Network(f"{self.controller}/32"))
        for i, x in enumerate(nets):
            for y in nets[i + 1:]:
                if x.overlaps(y):
                    return False
        return True


def plan_addresses(doc: TopologyDoc,
                   vll_bound_links: dict[str, str]) -> AddressPlan:
    """Deterministic addressing: /30 per routed link, /32 loopbacks.

    ``vll_bound_links`` maps customer-link id -> vll id; each such pair of
    links shares a single /30 between the two customer edges because the
    service bridges them at layer 2.
    """
    loopbacks = {}
    for i, nid in enumerate(sorted(n.node_id for n in doc.nodes)):
        loopbacks[nid] = IPv4Address(LOOPBACK_POOL + 1 + i)
    link_nets: dict[str, IPv4Network] = {}
    link_addr: dict[tuple[str, str], IPv4Interface] = {}
    block = 0
    for link in sorted(doc.links, key=lambda l: l.link_id):
        if link.link_id in vll_bound_links:
            continue
        net = IPv4Network((LINK_POOL + 4 * block, 30))
        block += 1
        link_nets[link.link_id] = net
        lo, hi = sorted((link.a[0], link.b[0]))
        link_addr[(link.link_id, lo)] = IPv4Interface((int(net[1]), 30))
        link_addr[(link.link_id, hi)] = IPv4Interface((int(net[2]), 30))
    vll_pair_nets: dict[str, IPv4Network] = {}
    for vll in sorted(doc.vlls, key=lambda v: v.vll_id):
        if vll.vll_id not in set(vll_bound_links.values()):
            continue
        net = IPv4Network((LINK_POOL + 4 * block, 30))
        block += 1
        vll_pair_nets[vll.vll_id] = net
    return AddressPlan(loopbacks, link_nets, link_addr, vll_pair_nets)


# -- deployment --------------------------------------------------------------

class Link:
    def __init__(self, spec: LinkSpec) -> None:
        self.spec = spec
        self.up = True

    def peer(self, node_id: str) -> tuple[str, int]:
        return self.spec.peer_of(node_id)


class Deployment:
    """A running simulated network; the only mutation entry point."""

    def __init__(self, doc: TopologyDoc, seed: int = 0,
                 model: CostModel | None = None) -> None:
        self.doc = doc
        self.seed = seed
        self.model = model or DEFAULT_MODEL
        self.sim = Simulation()
        self.ledger = CostLedger(lambda: self.sim.now)
        self.nodes: dict[str, OshiNode] = {}
        self.links: dict[str, Link] = {}
        self.by_port: dict[tuple[str, int], Link] = {}
        self.taps: dict[tuple[str, int], list[tuple[float, bytes]]] = {}
        self.udp_log: dict[str, list[tuple[float, Ipv4Packet]]] = {}
        self._echo_seen: set[str] = set()
        self.controller: Controller | None = None
        self.plan: AddressPlan | None = None
        self.converged_at: float | None = None

    # construction ----------------------------------------------------------

    def build(self) -> "Deployment":
        doc = self.doc
        roles = {n.node_id: ROLE_TOKENS[n.role] for n in doc.nodes}
        links_of: dict[str, list[LinkSpec]] = {n.node_id: [] for n in doc.nodes}
        for link in doc.links:
            links_of[link.a[0]].append(link)
            links_of[link.b[0]].append(link)

        # which customer links are claimed by a pre-declared service
        vll_bound: dict[str, str] = {}
        vll_ce: dict[str, list[tuple[str, int]]] = {}
        for vll in doc.vlls:
            claimed = []
            for side in (vll.end_a, vll.end_b):
                end = (str(side["node"]), int(side["port"]))
                link = next((l for l in links_of[end[0]]
                             if l.port_of(end[0]) == end[1]), None)
                if link is not None:
                    other = link.peer_of(end[0])
                    if roles[other[0]] is not NodeRole.CUSTOMER_EDGE:
                        raise DeployError(
                            f"vll {vll.vll_id}: endpoint port {end} carries a "
                            f"provider link")
                    claimed.append(link.link_id)
                    vll_ce.setdefault(vll.vll_id, []).append(other)
            if len(claimed) == 1:
                raise DeployError(
                    f"vll {vll.vll_id}: both endpoints must be bare ports or "
                    f"both customer-edge attached")
            for lid in claimed:
                vll_bound[lid] = vll.vll_id

        plan = plan_addresses(doc, vll_bound)
        self.plan = plan
        if not plan.audit_disjoint():
            raise DeployError("address plan overlap")

        node_index = {nid: i for i, nid in
                      enumerate(sorted(n.node_id for n in doc.nodes))}
        has_scs = {
            nid: roles[nid] in (NodeRole.CORE, NodeRole.ACCESS)
            or any(l.overlay != "none" for l in links_of[nid])
            for nid in links_of}

        sdn_hosts = sorted(nid for nid, r in roles.items()
                           if r in (NodeRole.CORE, NodeRole.ACCESS))
        if not sdn_hosts and doc.vlls:
            raise DeployError("no SDN-capable node to host the controller")
        controller_host = sdn_hosts[0] if sdn_hosts else None
        if controller_host is not None:
            self.controller = Controller(self.sim, plan.controller)

        overlay_links = sorted(l.link_id for l in doc.links
                               if l.overlay != "none")
        vni_of = {lid: i + 1 for i, lid in enumerate(overlay_links)}

        for decl in sorted(doc.nodes, key=lambda n: n.node_id):
            nid = decl.node_id
            role = roles[nid]
            cfg = NodeConfig(
                node_id=nid, index=node_index[nid], role=role,
                loopback=plan.loopbacks[nid], coexistence=doc.coexistence,
                controller_ip=plan.controller if controller_host else None,
                is_controller_host=(nid == controller_host),
                hello_offset=0.001 * node_index[nid])
            for link in sorted(links_of[nid], key=lambda l: l.link_id):
                port = link.port_of(nid)
                peer_id, peer_port = link.peer_of(nid)
                cfg.ports.append(port)
                cfg.neighbor_macs[port] = node_mac(node_index[peer_id], peer_port)
                if link.overlay != "none":
                    und = UNDERLAY_POOL + 2 * (vni_of[link.link_id] - 1)
                    local_is_lo = nid == min(nid, peer_id)
                    cfg.tunnels.append(TunnelConfig(
                        port, vni_of[link.link_id],
                        TunnelKind.VXLAN_KERNEL if link.overlay == "vxlan"
                        else TunnelKind.USERSPACE_VPN,
                        IPv4Address(und + (1 if local_is_lo else 2)),
                        IPv4Address(und + (2 if local_is_lo else 1))))
                if link.link_id in vll_bound:
                    # service-owned customer link: no routed interface on the
                    # PE side; the two customer edges share one /30
                    if role is NodeRole.CUSTOMER_EDGE:
                        vll_id = vll_bound[link.link_id]
                        net = plan.vll_pair_nets[vll_id]
                        pair = sorted(vll_ce[vll_id])
                        idx = next(i for i, (cid, _) in enumerate(pair)
                                   if cid == nid)
                        peer_ce, peer_ce_port = pair[1 - idx]
                        addr = IPv4Interface((int(net[1 + idx]), 30))
                        cfg.interfaces.append(IfaceConfig(
                            port, addr, link.cost, passive=True))
                        cfg.static_routes.append(StaticRoute(
                            IPv4Network("0.0.0.0/0"),
                            IPv4Address(int(net[2 - idx])), port))
                        cfg.neighbor_macs[port] = node_mac(
                            node_index[peer_ce], peer_ce_port)
                    continue
                addr = plan.link_addr[(link.link_id, nid)]
                peer_is_ce = roles[peer_id] is NodeRole.CUSTOMER_EDGE
                iface = IfaceConfig(
                    port, addr, link.cost,
                    passive=(peer_is_ce or role is NodeRole.CUSTOMER_EDGE),
                    untagged_peer=not has_scs[peer_id])
                cfg.interfaces.append(iface)
                if role is NodeRole.CUSTOMER_EDGE:
                    cfg.static_routes.append(StaticRoute(
                        IPv4Network("0.0.0.0/0"),
                        plan.link_addr[(link.link_id, peer_id)].ip, port))
                elif role is NodeRole.ACCESS and peer_is_ce:
                    cfg.policies.setdefault(port, []).append(UntaggedToIp())
            node = node_bootstrap(self.sim, cfg)
            node.transmit = self._transmit_fn(nid)
            node.charge = self.ledger.charge
            node.costs = self.model
            node.deliver_hook = self._on_deliver
            self.nodes[nid] = node

        if self.controller is not None:
            self.controller.attach(self.nodes[controller_host])
        for link in doc.links:
            run = Link(link)
            self.links[link.link_id] = run
            self.by_port[link.a] = run
            self.by_port[link.b] = run
            if self.controller is None:
                continue
            vids = set(doc.node(link.a[0]).reserved_vids)
            vids.update(doc.node(link.b[0]).reserved_vids)
            if doc.coexistence.mode == "tagged":
                vids.add(doc.coexistence.ip_vid)
            if vids:
                self.controller.allocator.reserve(link_key(link.a, link.b), vids)
        return self

    def _transmit_fn(self, node_id: str):
        def transmit(port: int, data: bytes) -> None:
            link = self.by_port.get((node_id, port))
            if link is None:
                self.taps.setdefault((node_id, port), []).append(
                    (self.sim.now, data))
                return
            if not link.up:
                return
            peer_id, peer_port = link.peer(node_id)
            delay = link.spec.delay

            def deliver() -> None:
                if link.up:
                    self.nodes[peer_id].receive(peer_port, data)

            self.sim.schedule(delay, deliver)
        return transmit

    def _on_deliver(self, node_id: str, packet: Ipv4Packet) -> None:
        if packet.protocol == ECHO_PROTO:
            try:
                doc = json.loads(packet.payload.decode())
            except (UnicodeDecodeError, json.JSONDecodeError):
                return
            if doc.get("kind") == "echo_req":
                reply = Ipv4Packet(packet.dst, packet.src, 64, ECHO_PROTO,
                                   json.dumps({"kind": "echo_rep",
                                               "id": doc["id"]},
                                              sort_keys=True).encode())
                self.nodes[node_id].originate_ip(reply)
            elif doc.get("kind") == "echo_rep":
                self._echo_seen.add(doc["id"])
        else:
            self.udp_log.setdefault(node_id, []).append((self.sim.now, packet))

    # orchestration -----------------------------------------------------------

    def _routing_digest(self) -> tuple:
        parts = []
        for nid in sorted(self.nodes):
            d = self.nodes[nid].daemon
            if d.active:
                parts.append((nid, d.lsdb.digest()))
        return tuple(parts)

    def _registered_count(self) -> int:
        return len(self.controller.registered) if self.controller else 0

    def run(self, duration: float) -> None:
        self.sim.run_until(self.sim.now + duration)

    def settle(self, min_time: float = 5.0, max_time: float = 120.0,
               stable_for: int = 3) -> None:
        """Advance until the routing state stops changing."""
        deadline = self.sim.now + max_time
        self.sim.run_until(self.sim.now + min_time)
        last = None
        stable = 0
        while self.sim.now < deadline:
            snapshot = (self._routing_digest(), self._registered_count())
            if snapshot == last:
                stable += 1
                if stable >= stable_for:
                    return
            else:
                stable = 0
                last = snapshot
            self.sim.run_until(self.sim.now + 1.0)
        raise DeployError("routing did not settle in time")

    def converge(self) -> None:
        """Boot sequence: routing, registration, discovery, declared services."""
        self.settle()
        if self.controller is None:
            self.converged_at = self.sim.now
            self.sim.record("deployed", f"{len(self.nodes)} nodes")
            return
        sdn_nodes = [n for n in self.nodes.values() if n.is_sdn]
        deadline = self.sim.now + 60.0
        while self._registered_count() < len(sdn_nodes):
            if self.sim.now >= deadline:
                missing = sorted(set(n.node_id for n in sdn_nodes)
                                 - set(self.controller.registered))
                raise DeployError(f"nodes never registered: {missing}")
            self.sim.run_until(self.sim.now + 1.0)
        self.controller.discover_topology()
        self.run(3.0)
        for vll in sorted(self.doc.vlls, key=lambda v: v.vll_id):
            end_a = VllEndpoint.from_json(vll.end_a)
            end_b = VllEndpoint.from_json(vll.end_b)
            self.provision_vll(end_a, end_b)
        self.converged_at = self.sim.now
        self.sim.record("deployed", f"{len(self.nodes)} nodes")

    # service wrappers ---------------------------------------------------------

    def provision_vll(self, end_a: VllEndpoint,
                      end_b: VllEndpoint) -> VllDescriptor:
        assert self.controller is not None
        vll = self.controller.push_vll(end_a, end_b)
        deadline = self.sim.now + 30.0
        while vll.state == "Pending" and self.sim.now < deadline:
            self.sim.run_until(self.sim.now + 0.1)
        if vll.state == "Pending":
            raise DeployError(f"vll {vll.vll_id} stuck pending")
        return vll

    def delete_vll(self, vll_id: str) -> dict:
        assert self.controller is not None
        released = self.controller.delete_vll(vll_id)
        self.run(2.0)
        return released

    def flow_push(self, dpid: int, entry_json: dict) -> int:
        assert self.controller is not None
        box: dict = {}

        def done(ok: bool, result: object) -> None:
            box["ok"] = ok
            box["result"] = result

        self.controller.static_flow_push(dpid, entry_json, done)
        deadline = self.sim.now + 10.0
        while "ok" not in box and self.sim.now < deadline:
            self.sim.run_until(self.sim.now + 0.1)
        if "ok" not in box:
            raise DeployError("flow push timed out")
        if not box["ok"]:
            raise ControllerError(str(box["result"]))
        return box["result"]["handle"]

    # state changes -------------------------------------------------------------

    def set_link_state(self, link_id: str, up: bool) -> None:
        link = self.links.get(link_id)
        if link is None:
            raise KeyError(f"unknown link {link_id}")
        if link.up == up:
            return
        link.up = up
        self.sim.record("link-admin", f"{link_id} {'up' if up else 'down'}")
        for node_id, port in (link.spec.a, link.spec.b):
            node = self.nodes[node_id]
            daemon_port = node.virt_of.get(port, port)
            if daemon_port in node.daemon.interfaces:
                if up:
                    node.daemon.interface_up(daemon_port)
                else:
                    node.daemon.interface_down(daemon_port)
            if node.is_sdn:
                node.mgmt.port_status(port, up)
        self.settle(min_time=1.0, max_time=60.0)

    # measurement helpers ---------------------------------------------------------

    def node_addr(self, node_id: str) -> IPv4Address:
        node = self.nodes[node_id]
        if node.daemon.active:
            return node.config.loopback
        ifaces = sorted(node.daemon.interfaces.values(), key=lambda i: i.port)
        return ifaces[0].addr.ip

    def send_udp(self, src: str, dst: str, size: int = 1000,
                 marker: bytes = b"") -> bool:
        payload = marker + b"\x00" * max(0, size - 20 - len(marker))
        pkt = Ipv4Packet(self.node_addr(src), self.node_addr(dst), 64, 17,
                         payload)
        return self.nodes[src].originate_ip(pkt)

    def ping(self, src: str, dst: str, timeout: float = 2.0) -> bool:
        token = f"{src}->{dst}@{self.sim.now}"
        pkt = Ipv4Packet(self.node_addr(src), self.node_addr(dst), 64,
                         ECHO_PROTO,
                         json.dumps({"kind": "echo_req", "id": token},
                                    sort_keys=True).encode())
        if not self.nodes[src].originate_ip(pkt):
            return False
        deadline = self.sim.now + timeout
        while token not in self._echo_seen and self.sim.now < deadline:
            self.sim.run_until(self.sim.now + 0.05)
        return token in self._echo_seen

    def inject_frame(self, node_id: str, port: int,
                     frame: EthernetFrame) -> None:
        data = encode_frame(frame)
        self.sim.schedule(0.0, lambda: self.nodes[node_id].receive(port, data))

    def tap_frames(self, node_id: str, port: int) -> list[EthernetFrame]:
        return [decode_frame(data)
                for _, data in self.taps.get((node_id, port), [])]

    def clear_taps(self) -> None:
        self.taps.clear()
        self.udp_log.clear()

    def routing_participants(self) -> list[str]:
        return sorted(nid for nid, n in self.nodes.items() if n.daemon.active)

    def reachability(self) -> float:
        """Fraction of ordered loopback pairs a FIB walk can deliver."""
        participants = self.routing_participants()
        total = 0
        ok = 0
        for src in participants:
            for dst in participants:
                if src == dst:
                    continue
                total += 1
                if self._walk(src, self.nodes[dst].config.loopback):
                    ok += 1
        return ok / total if total else 1.0

    def _walk(self, src: str, dst_addr: IPv4Address) -> bool:
        cur = self.nodes[src]
        for _ in range(len(self.nodes) + 2):
            if dst_addr in cur.daemon.local_addrs():
                return True
            entry = cur.daemon.fib.lookup(dst_addr)
            if entry is None or entry.port < 0:
                return False
            phys = cur.phys_of.get(entry.port, entry.port)
            link = self.by_port.get((cur.node_id, phys))
            if link is None or not link.up:
                return False
            peer_id, _ = link.peer(cur.node_id)
            cur = self.nodes[peer_id]
        return False

    def trace_udp(self, src: str, dst: str,
                  size: int = 1000) -> list[tuple[str, float, float]]:
        """Charge profile of one data packet end to end.

        Returns (node, units, arrival offset) aggregated per node; raises
        if the destination never sees the packet.
        """
        before = len(self.udp_log.get(dst, []))
        self.ledger.start_trace()
        t0 = self.sim.now
        sent = self.send_udp(src, dst, size, marker=b"TRACE")
        self.sim.run_until(self.sim.now + 5.0)
        trace = self.ledger.stop_trace()
        if not sent or len(self.udp_log.get(dst, [])) <= before:
            raise DeployError(f"destination {dst} unreachable from {src}")
        per_node: dict[str, tuple[float, float]] = {}
        for node_id, units, t in trace:
            total, first = per_node.get(node_id, (0.0, t - t0))
            per_node[node_id] = (total + units, min(first, t - t0))
        return [(nid, units, off)
                for nid, (units, off) in sorted(per_node.items())]

    def stats_snapshot(self) -> dict:
        return {nid: self.ledger.total(nid) for nid in sorted(self.nodes)}


def deploy(doc: TopologyDoc, seed: int = 0,
           model: CostModel | None = None) -> Deployment:
    """Build, boot and converge a whole network from one document."""
    deployment = Deployment(doc, seed, model).build()
    deployment.converge()
    return deployment
