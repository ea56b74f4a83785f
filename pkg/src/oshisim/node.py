"""Hybrid IP/SDN node: switch pipeline, IP engine and management entity.

A frame arriving on a physical or tunnel port crosses the switch, reaches
the paired virtual port, gets routed by the IP engine and re-enters the
switch on the way out, so plain IP forwarding costs two pipeline
traversals while a service-path frame costs one.  Plain routers and
customer edges skip the switch entirely unless tunnel ports force one in
front of them.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Interface, IPv4Network
from typing import TYPE_CHECKING, Callable, Union

from . import flowengine as fe
from . import overlay
from .netmodel import (
    ALL_ROUTERS_MAC,
    BROADCAST_MAC,
    ETHERTYPE_IPV4,
    ETHERTYPE_PROBE,
    IPPROTO_CONTROL,
    IPPROTO_ROUTING,
    RESERVED_VIDS,
    EthernetFrame,
    FrameError,
    Ipv4Packet,
    MacAddr,
    decode_frame,
    decode_packet,
    encode_frame,
    encode_packet,
    node_mac,
)
from .overlay import TunnelError, TunnelKind, TunnelPort
from .routing import DropReason, Interface, RoutingDaemon, StaticRoute

if TYPE_CHECKING:
    from .sim import Simulation

#: virtual port id = physical port id + this offset (1:1 pairing)
VPORT_OFFSET = 100

COOKIE_COEXIST = 1
COOKIE_BOOTSTRAP = 2
COOKIE_POLICY = 3

PRIO_PROBE = 1000
PRIO_VLL_CLASSIFY = 600
PRIO_TAGGED_IP = 550
PRIO_COEXIST = 500
PRIO_SBP = 400
PRIO_MISS = 0

REGISTER_INTERVAL = 2.0


class BootstrapError(ValueError):
    """Invalid node configuration."""


class NodeRole(enum.Enum):
    CORE = "cr"
    ACCESS = "pe"
    ROUTER = "router"
    CUSTOMER_EDGE = "ce"


@dataclass(frozen=True)
class Coexistence:
    """How IP and service traffic share provider links."""

    mode: str  # "tagged" | "untagged"
    ip_vid: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("tagged", "untagged"):
            raise ValueError(f"unknown coexistence mode {self.mode}")
        if self.mode == "tagged":
            if self.ip_vid is None:
                raise ValueError("tagged coexistence needs ip_vid")
            if self.ip_vid in RESERVED_VIDS:
                raise BootstrapError(f"ip_vid {self.ip_vid} is reserved")
            if not 1 <= self.ip_vid <= 4094:
                raise ValueError(f"ip_vid {self.ip_vid} out of range")


UNTAGGED_COEXISTENCE = Coexistence("untagged")


# -- ingress policy -------------------------------------------------------

@dataclass(frozen=True)
class UntaggedToIp:
    pass


@dataclass(frozen=True)
class UntaggedToVll:
    vll_id: str


@dataclass(frozen=True)
class TaggedToIp:
    vid: int


@dataclass(frozen=True)
class TaggedToVll:
    vid: int
    vll_id: str


PolicyEntry = Union[UntaggedToIp, UntaggedToVll, TaggedToIp, TaggedToVll]


class IngressPolicy:
    """Per access-port customer traffic dispositions."""

    def __init__(self) -> None:
        self._ports: dict[int, list[PolicyEntry]] = {}

    def entries(self, port: int) -> list[PolicyEntry]:
        return list(self._ports.get(port, ()))

    def add(self, port: int, entry: PolicyEntry) -> None:
        existing = self._ports.setdefault(port, [])
        if isinstance(entry, (UntaggedToIp, UntaggedToVll)):
            if any(isinstance(e, (UntaggedToIp, UntaggedToVll)) for e in existing):
                raise BootstrapError(f"port {port} already has an untagged disposition")
        else:
            if any(getattr(e, "vid", None) == entry.vid for e in existing):
                raise BootstrapError(f"port {port} already maps vid {entry.vid}")
        if isinstance(entry, (UntaggedToIp, TaggedToIp)):
            # one routed disposition per port keeps the egress re-tag unambiguous
            if any(isinstance(e, (UntaggedToIp, TaggedToIp)) for e in existing):
                raise BootstrapError(f"port {port} already routes to the IP engine")
        existing.append(entry)

    def remove(self, port: int, entry: PolicyEntry) -> None:
        self._ports.get(port, []).remove(entry)

    def ports(self) -> list[int]:
        return sorted(self._ports)


@dataclass(frozen=True)
class ToIpEngine:
    pop_vid: int | None = None


@dataclass(frozen=True)
class ToSbp:
    vll_id: str


@dataclass(frozen=True)
class DropFrame:
    pass


Classification = Union[ToIpEngine, ToSbp, DropFrame]


# -- configuration --------------------------------------------------------

@dataclass
class IfaceConfig:
    port: int  # physical port number
    addr: IPv4Interface
    cost: int = 1
    passive: bool = False  # customer-facing: advertised as a stub, no hellos
    untagged_peer: bool = False  # peer has no switch, keep IP untagged


@dataclass
class TunnelConfig:
    port: int
    vni: int
    kind: TunnelKind
    local: IPv4Address
    remote: IPv4Address


@dataclass
class NodeConfig:
    node_id: str
    index: int
    role: NodeRole
    loopback: IPv4Address
    coexistence: Coexistence = UNTAGGED_COEXISTENCE
    ports: list[int] = field(default_factory=list)
    tunnels: list[TunnelConfig] = field(default_factory=list)
    interfaces: list[IfaceConfig] = field(default_factory=list)
    static_routes: list[StaticRoute] = field(default_factory=list)
    policies: dict[int, list[PolicyEntry]] = field(default_factory=dict)
    neighbor_macs: dict[int, MacAddr] = field(default_factory=dict)
    controller_ip: IPv4Address | None = None
    is_controller_host: bool = False
    hello_offset: float = 0.0


@dataclass
class NodeCounters:
    frames_in: int = 0
    data_traversals: int = 0
    control_traversals: int = 0
    ip_forwarded: int = 0
    ip_forwarded_control: int = 0
    ip_delivered: int = 0
    ip_delivered_control: int = 0
    sbp_frames: int = 0
    no_route_drops: int = 0
    ttl_drops: int = 0
    malformed_drops: int = 0
    oversize_drops: int = 0

    @property
    def scs_traversals(self) -> int:
        return self.data_traversals + self.control_traversals

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "frames_in", "data_traversals", "control_traversals",
            "ip_forwarded", "ip_forwarded_control", "ip_delivered",
            "ip_delivered_control", "sbp_frames", "no_route_drops",
            "ttl_drops", "malformed_drops", "oversize_drops")}
        d["scs_traversals"] = self.scs_traversals
        return d


def _is_control_frame(frame: EthernetFrame) -> bool:
    if frame.ethertype == ETHERTYPE_PROBE:
        return True
    if frame.ethertype == ETHERTYPE_IPV4 and len(frame.payload) >= 20:
        return frame.payload[9] in (IPPROTO_ROUTING, IPPROTO_CONTROL)
    return False


def _is_control_proto(protocol: int) -> bool:
    return protocol in (IPPROTO_ROUTING, IPPROTO_CONTROL)


class OshiNode:
    """One simulated device; the event loop owns it, nothing shares it."""

    def __init__(self, sim: "Simulation", config: NodeConfig) -> None:
        self.sim = sim
        self.config = config
        self.node_id = config.node_id
        self.role = config.role
        self.counters = NodeCounters()
        self.policy = IngressPolicy()
        for port, entries in sorted(config.policies.items()):
            for entry in entries:
                self.policy.add(port, entry)
        self.tunnels: dict[int, TunnelPort] = {}
        for tc in config.tunnels:
            self.tunnels[tc.port] = TunnelPort(tc.port, tc.vni, tc.kind,
                                               tc.local, tc.remote)
        self.has_scs = (config.role in (NodeRole.CORE, NodeRole.ACCESS)
                        or bool(self.tunnels))
        self.is_sdn = config.role in (NodeRole.CORE, NodeRole.ACCESS)
        self.scs: fe.SwitchState | None = None
        self.virt_of: dict[int, int] = {}
        self.phys_of: dict[int, int] = {}
        # injected by the deployment
        self.transmit: Callable[[int, bytes], None] = lambda port, data: None
        self.charge: Callable[[str, float], None] | None = None
        self.costs = None
        self.deliver_hook: Callable[[str, Ipv4Packet], None] | None = None
        self.controller = None  # set on the hosting node

        daemon_ports = {}
        for ic in config.interfaces:
            daemon_ports[ic.port] = ic
        self.daemon = RoutingDaemon(
            sim, config.node_id, config.loopback, self._send_routing,
            active=config.role is not NodeRole.CUSTOMER_EDGE,
            hello_offset=config.hello_offset)
        self._iface_configs = daemon_ports
        self.mgmt = ManagementEntity(self)

    # -- bootstrap -----------------------------------------------------

    def bootstrap(self) -> None:
        cfg = self.config
        all_ports = sorted(set(cfg.ports) | set(self.tunnels))
        for p in all_ports:
            if p >= VPORT_OFFSET:
                raise BootstrapError(
                    f"{self.node_id}: port {p} collides with virtual range")
        if self.has_scs:
            self.scs = fe.SwitchState(datapath_id=cfg.index + 1)
            for p in all_ports:
                v = p + VPORT_OFFSET
                self.scs.ports.add(p)
                self.scs.ports.add(v)
                self.virt_of[p] = v
                self.phys_of[v] = p
            self._install_base_rules(all_ports)
        for p, ic in sorted(self._iface_configs.items()):
            port = self.virt_of[p] if self.has_scs else p
            self.daemon.add_interface(Interface(
                port=port, addr=ic.addr, cost=ic.cost, passive=ic.passive))
        for route in cfg.static_routes:
            port = (self.virt_of[route.port] if self.has_scs else route.port)
            self.daemon.static_routes.append(
                StaticRoute(route.prefix, route.next_hop, port))
        if cfg.is_controller_host and cfg.controller_ip is not None:
            self.daemon.stub_prefixes.append(
                (IPv4Network(f"{cfg.controller_ip}/32"), 0))
            self.daemon.extra_local.add(cfg.controller_ip)
        self.daemon.start()
        if self.is_sdn:
            self.mgmt.start()

    def _install_base_rules(self, ports: list[int]) -> None:
        assert self.scs is not None
        coex = self.config.coexistence
        routed = set(self._iface_configs)
        customer = {p for p in ports
                    if self.policy.entries(p)
                    or (p in self._iface_configs and self._iface_configs[p].passive)}
        for p in ports:
            v = self.virt_of[p]
            if self.is_sdn and p not in customer:
                # discovery probes ride provider links only
                fe.install_flow(self.scs, fe.FlowEntry(
                    0, PRIO_PROBE,
                    fe.FlowMatch(in_port=p, vlan_vid=fe.VID_ABSENT,
                                 ethertype=ETHERTYPE_PROBE),
                    (fe.GotoTable(2),), COOKIE_BOOTSTRAP))
            if p not in routed:
                continue
            tagged_ip = next((e for e in self.policy.entries(p)
                              if isinstance(e, TaggedToIp)), None)
            plain_peer = self._iface_configs[p].untagged_peer
            if tagged_ip is not None:
                self._install_pair(p, v, pop_vid=tagged_ip.vid,
                                   push_vid=tagged_ip.vid,
                                   priority=PRIO_TAGGED_IP)
            elif coex.mode == "tagged" and p not in customer and not plain_peer:
                self._install_pair(p, v, pop_vid=coex.ip_vid,
                                   push_vid=coex.ip_vid,
                                   priority=PRIO_COEXIST)
            else:
                self._install_pair(p, v, pop_vid=None, push_vid=None,
                                   priority=PRIO_COEXIST)
        if self.is_sdn:
            fe.install_flow(self.scs, fe.FlowEntry(
                2, 100, fe.FlowMatch(ethertype=ETHERTYPE_PROBE),
                (fe.OutputController(),), COOKIE_BOOTSTRAP))
        fe.install_flow(self.scs, fe.FlowEntry(
            0, PRIO_MISS, fe.FlowMatch(), (fe.GotoTable(1),),
            COOKIE_BOOTSTRAP))

    def ensure_port(self, port: int) -> None:
        """Create a customer-facing port (plus its virtual pair) on demand."""
        if self.scs is None:
            raise BootstrapError(f"{self.node_id} has no switch")
        if not 1 <= port < VPORT_OFFSET:
            raise BootstrapError(f"port {port} outside 1..{VPORT_OFFSET - 1}")
        if port in self.virt_of:
            return
        v = port + VPORT_OFFSET
        self.scs.ports.add(port)
        self.scs.ports.add(v)
        self.virt_of[port] = v
        self.phys_of[v] = port

    def _install_pair(self, p: int, v: int, pop_vid: int | None,
                      push_vid: int | None, priority: int) -> None:
        """The two per-port coexistence rules: toward and from the IP engine."""
        assert self.scs is not None
        if pop_vid is None:
            match_in = fe.FlowMatch(in_port=p, vlan_vid=fe.VID_ABSENT,
                                    ethertype=ETHERTYPE_IPV4)
            to_ip: tuple[fe.FlowAction, ...] = (fe.Output(v),)
        else:
            match_in = fe.FlowMatch(in_port=p, vlan_vid=pop_vid,
                                    ethertype=ETHERTYPE_IPV4)
            to_ip = (fe.PopVlan(), fe.Output(v))
        fe.install_flow(self.scs, fe.FlowEntry(
            0, priority, match_in, to_ip, COOKIE_COEXIST))
        if push_vid is None:
            from_ip: tuple[fe.FlowAction, ...] = (fe.Output(p),)
        else:
            from_ip = (fe.PushVlan(push_vid), fe.Output(p))
        fe.install_flow(self.scs, fe.FlowEntry(
            0, priority, fe.FlowMatch(in_port=v), from_ip, COOKIE_COEXIST))

    # -- charging -------------------------------------------------------

    def _charge(self, frame_is_control: bool, units: float) -> None:
        if not frame_is_control and self.charge is not None and units:
            self.charge(self.node_id, units)

    def _tunnel_half_cost(self, tunnel: TunnelPort) -> float:
        if self.costs is None:
            return 0.0
        if tunnel.kind is TunnelKind.USERSPACE_VPN:
            return self.costs.c_vpn / 2.0
        return self.costs.c_vx / 2.0

    # -- data plane -----------------------------------------------------

    def receive(self, port: int, data: bytes) -> None:
        """Wire arrival: decapsulate if needed, then dispatch."""
        self.counters.frames_in += 1
        try:
            if port in self.tunnels:
                tunnel = self.tunnels[port]
                datagram = overlay.decode_datagram(data)
                frame = overlay.decap(tunnel, datagram)
                control = _is_control_frame(frame)
                self._charge(control, self._tunnel_half_cost(tunnel))
            else:
                frame = decode_frame(data)
                control = _is_control_frame(frame)
        except (TunnelError, FrameError):
            self.counters.malformed_drops += 1
            return
        if self.costs is not None:
            self._charge(control, self.costs.c_base)
        self._dispatch(frame, port, control)

    def inject_frame(self, port: int, frame: EthernetFrame) -> None:
        """Customer-side injection; takes the same path as a wire arrival."""
        self.receive(port, encode_frame(frame))

    def _dispatch(self, frame: EthernetFrame, port: int, control: bool) -> None:
        if self.scs is None:
            self._ip_input(frame, port, control)
            return
        self._run_pipeline(frame, port, control)

    def _run_pipeline(self, frame: EthernetFrame, in_port: int,
                      control: bool) -> None:
        assert self.scs is not None
        if control:
            self.counters.control_traversals += 1
        else:
            self.counters.data_traversals += 1
            if self.costs is not None:
                self._charge(False, self.costs.c_scs)
        emissions = fe.pipeline_process(self.scs, frame, in_port)
        external = in_port not in self.phys_of  # arrived on phys/tunnel
        for target, out_frame in emissions:
            if target == fe.CONTROLLER:
                self.mgmt.packet_in(out_frame, in_port)
            elif isinstance(target, int) and target in self.phys_of:
                self._ip_input(out_frame, target, control)
            else:
                if external and not control:
                    self.counters.sbp_frames += 1
                self._emit_frame(int(target), out_frame, control)

    def _ip_input(self, frame: EthernetFrame, iface_port: int,
                  control: bool) -> None:
        if frame.ethertype != ETHERTYPE_IPV4:
            self.counters.malformed_drops += 1
            return
        try:
            packet = decode_packet(frame.payload)
        except FrameError:
            self.counters.malformed_drops += 1
            return
        self._route_packet(packet, iface_port)

    def _route_packet(self, packet: Ipv4Packet, in_port: int | None) -> None:
        control = _is_control_proto(packet.protocol)
        verdict, detail = self.daemon.forward_ip(packet, in_port)
        if verdict == "deliver":
            if control:
                self.counters.ip_delivered_control += 1
            else:
                self.counters.ip_delivered += 1
            self._deliver_local(packet, in_port)
        elif verdict == "forward":
            out_port, fwd, next_hop = detail
            if control:
                self.counters.ip_forwarded_control += 1
            else:
                self.counters.ip_forwarded += 1
                if self.costs is not None:
                    self._charge(False, self.costs.c_ip)
            self._ip_output(fwd, out_port, next_hop, control)
        else:
            if detail is DropReason.TTL_EXPIRED:
                self.counters.ttl_drops += 1
            else:
                self.counters.no_route_drops += 1

    def _deliver_local(self, packet: Ipv4Packet, in_port: int | None) -> None:
        if packet.protocol == IPPROTO_ROUTING:
            self._routing_message(packet, in_port)
        elif packet.protocol == IPPROTO_CONTROL:
            if (self.controller is not None
                    and packet.dst == self.config.controller_ip):
                self.controller.receive(packet)
            else:
                self.mgmt.handle_control(packet)
        elif self.deliver_hook is not None:
            self.deliver_hook(self.node_id, packet)

    def _routing_message(self, packet: Ipv4Packet, in_port: int | None) -> None:
        try:
            doc = json.loads(packet.payload.decode())
        except (UnicodeDecodeError, json.JSONDecodeError):
            self.counters.malformed_drops += 1
            return
        if doc.get("type") == "hello":
            self.daemon.process_hello(doc, in_port)
        elif doc.get("type") == "lsa":
            from .routing import lsa_from_payload
            self.daemon.flood_lsa(lsa_from_payload(doc), in_port)

    def _ip_output(self, packet: Ipv4Packet, daemon_port: int,
                   next_hop: IPv4Address, control: bool) -> None:
        phys = self.phys_of.get(daemon_port, daemon_port)
        dst_mac = self.resolve_mac(phys, next_hop)
        frame = EthernetFrame(dst_mac, node_mac(self.config.index, phys),
                              ETHERTYPE_IPV4, encode_packet(packet))
        if self.scs is not None:
            self._run_pipeline(frame, daemon_port, control)
        else:
            self._emit_frame(phys, frame, control)

    def _send_routing(self, daemon_port: int, packet: Ipv4Packet) -> None:
        phys = self.phys_of.get(daemon_port, daemon_port)
        frame = EthernetFrame(ALL_ROUTERS_MAC,
                              node_mac(self.config.index, phys),
                              ETHERTYPE_IPV4, encode_packet(packet))
        if self.scs is not None:
            self._run_pipeline(frame, daemon_port, control=True)
        else:
            self._emit_frame(phys, frame, control=True)

    def originate_ip(self, packet: Ipv4Packet) -> bool:
        """Send a locally generated packet; False if it had no route."""
        control = _is_control_proto(packet.protocol)
        verdict, detail = self.daemon.forward_ip(
            Ipv4Packet(packet.src, packet.dst, packet.ttl + 1,
                       packet.protocol, packet.payload), None)
        if verdict == "deliver":
            self._deliver_local(packet, None)
            return True
        if verdict == "forward":
            out_port, fwd, next_hop = detail
            if self.costs is not None and not control:
                self._charge(False, self.costs.c_ip)
            self._ip_output(fwd, out_port, next_hop, control)
            return True
        self.counters.no_route_drops += 1
        return False

    def _emit_frame(self, port: int, frame: EthernetFrame,
                    control: bool) -> None:
        try:
            if port in self.tunnels:
                tunnel = self.tunnels[port]
                datagram = overlay.encap(tunnel, frame)
                self._charge(control, self._tunnel_half_cost(tunnel))
                self.transmit(port, datagram.encode())
            else:
                self.transmit(port, encode_frame(frame))
        except (TunnelError, FrameError):
            self.counters.oversize_drops += 1

    def resolve_mac(self, phys_port: int, addr: IPv4Address) -> MacAddr:
        mac = self.config.neighbor_macs.get(phys_port)
        return mac if mac is not None else BROADCAST_MAC

    # -- introspection ----------------------------------------------------

    def dump_flows(self) -> list[dict]:
        return self.scs.dump() if self.scs is not None else []

    def dump_rib(self) -> list[dict]:
        return self.daemon.dump_rib()

    def counter_dump(self) -> dict:
        d = self.counters.to_dict()
        if self.scs is not None:
            d["switch"] = {
                "packets_in": self.scs.counters.packets_in,
                "packets_emitted": self.scs.counters.packets_emitted,
                "packets_dropped": self.scs.counters.packets_dropped,
                "packets_to_controller": self.scs.counters.packets_to_controller,
            }
        return d


def node_bootstrap(sim: "Simulation", config: NodeConfig) -> OshiNode:
    """Build a node, install its base rules and start its daemons."""
    node = OshiNode(sim, config)
    node.bootstrap()
    return node


def classify_ingress(node: OshiNode, frame: EthernetFrame,
                     port: int) -> Classification:
    """Where an access port sends a customer frame, per its policy."""
    entries = node.policy.entries(port)
    if frame.tag is None:
        for e in entries:
            if isinstance(e, UntaggedToIp):
                return ToIpEngine()
            if isinstance(e, UntaggedToVll):
                return ToSbp(e.vll_id)
        return DropFrame()
    for e in entries:
        if isinstance(e, TaggedToIp) and e.vid == frame.tag.vid:
            return ToIpEngine(pop_vid=e.vid)
        if isinstance(e, TaggedToVll) and e.vid == frame.tag.vid:
            return ToSbp(e.vll_id)
    return DropFrame()


class ManagementEntity:
    """Local agent: registers with the controller, executes its commands."""

    def __init__(self, node: OshiNode) -> None:
        self.node = node
        self.registered = False
        self._started = False

    @property
    def dpid(self) -> int:
        assert self.node.scs is not None
        return self.node.scs.datapath_id

    def start(self) -> None:
        self._started = True
        offset = 0.5 + self.node.config.index * 0.01
        self.node.sim.schedule(offset, self._register_tick)

    def _register_tick(self) -> None:
        if self.registered:
            return
        ports = sorted(set(self.node.config.ports) | set(self.node.tunnels))
        self.send_to_controller({
            "kind": "register",
            "dpid": self.dpid,
            "node": self.node.node_id,
            "role": self.node.role.value,
            "loopback": str(self.node.config.loopback),
            "ports": ports,
        })
        self.node.sim.schedule(REGISTER_INTERVAL, self._register_tick)

    def handle_control(self, packet: Ipv4Packet) -> None:
        try:
            doc = json.loads(packet.payload.decode())
        except (UnicodeDecodeError, json.JSONDecodeError):
            self.node.counters.malformed_drops += 1
            return
        kind = doc.get("kind")
        if kind == "register_ack":
            self.registered = True
        elif kind == "cmd":
            self._execute(doc)

    def _execute(self, doc: dict) -> None:
        op = doc.get("op")
        args = doc.get("args", {})
        reply: dict = {"kind": "reply", "req": doc.get("req"), "ok": True}
        try:
            if op == "flow_add":
                entry = fe.entry_from_json(args["entry"])
                assert self.node.scs is not None
                reply["result"] = {"handle": fe.install_flow(self.node.scs, entry)}
            elif op == "flow_del":
                assert self.node.scs is not None
                reply["result"] = {
                    "deleted": fe.delete_flows(self.node.scs, int(args["cookie"]))}
            elif op == "probe_emit":
                self._emit_probe(int(args["port"]))
                reply["result"] = {}
            elif op == "port_ensure":
                self.node.ensure_port(int(args["port"]))
                reply["result"] = {}
            elif op == "counters":
                reply["result"] = self.node.counter_dump()
            elif op == "policy_add":
                entry = _policy_entry_from_json(args["entry"])
                self.node.policy.add(int(args["port"]), entry)
                reply["result"] = {}
            elif op == "policy_del":
                entry = _policy_entry_from_json(args["entry"])
                self.node.policy.remove(int(args["port"]), entry)
                reply["result"] = {}
            else:
                reply = {"kind": "reply", "req": doc.get("req"), "ok": False,
                         "error": f"unknown op {op!r}"}
        except Exception as exc:  # reported to the controller, not raised
            reply = {"kind": "reply", "req": doc.get("req"), "ok": False,
                     "error": str(exc)}
        self.send_to_controller(reply)

    def _emit_probe(self, port: int) -> None:
        payload = json.dumps({"dpid": self.dpid, "port": port},
                             sort_keys=True).encode()
        frame = EthernetFrame(BROADCAST_MAC,
                              node_mac(self.node.config.index, port),
                              ETHERTYPE_PROBE, payload)
        self.node._emit_frame(port, frame, control=True)

    def packet_in(self, frame: EthernetFrame, in_port: int) -> None:
        self.send_to_controller({
            "kind": "packet_in",
            "dpid": self.dpid,
            "in_port": in_port,
            "data": encode_frame(frame).hex(),
        })

    def port_status(self, port: int, up: bool) -> None:
        if self._started:
            self.send_to_controller({"kind": "port_status", "dpid": self.dpid,
                                     "port": port, "up": up})

    def send_to_controller(self, obj: dict) -> None:
        ctrl = self.node.config.controller_ip
        if ctrl is None:
            return
        payload = json.dumps(obj, sort_keys=True).encode()
        packet = Ipv4Packet(self.node.config.loopback, ctrl, 64,
                            IPPROTO_CONTROL, payload)
        self.node.originate_ip(packet)


def _policy_entry_from_json(d: dict) -> PolicyEntry:
    kind = d.get("kind")
    if kind == "untagged_ip":
        return UntaggedToIp()
    if kind == "untagged_vll":
        return UntaggedToVll(d["vll_id"])
    if kind == "tagged_ip":
        return TaggedToIp(int(d["vid"]))
    if kind == "tagged_vll":
        return TaggedToVll(int(d["vid"]), d["vll_id"])
    raise ValueError(f"unknown policy entry {d!r}")


def policy_entry_to_json(entry: PolicyEntry) -> dict:
    if isinstance(entry, UntaggedToIp):
        return {"kind": "untagged_ip"}
    if isinstance(entry, UntaggedToVll):
        return {"kind": "untagged_vll", "vll_id": entry.vll_id}
    if isinstance(entry, TaggedToIp):
        return {"kind": "tagged_ip", "vid": entry.vid}
    return {"kind": "tagged_vll", "vid": entry.vid, "vll_id": entry.vll_id}
