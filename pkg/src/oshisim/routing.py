"""Link-state intra-domain routing and the longest-prefix-match engine.

Single area, point-to-point interfaces, no ECMP: equal-cost ties go to the
smallest next-hop router id so replays stay exact.  The daemon reasons
only over the ports it was configured with; on hybrid nodes those are the
virtual ports, never the physical ones.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from heapq import heappop, heappush
from ipaddress import IPv4Address, IPv4Interface, IPv4Network
from typing import TYPE_CHECKING, Callable, Iterable, Mapping

from .netmodel import ALL_ROUTERS_ADDR, IPPROTO_ROUTING, Ipv4Packet

if TYPE_CHECKING:
    from .sim import Simulation

RouterId = IPv4Address

HELLO_INTERVAL = 2.0
DEAD_INTERVAL = 8.0
LSA_MIN_INTERVAL = 1.0


class NeighborState(enum.Enum):
    DOWN = "down"
    INIT = "init"
    UP = "up"


class DropReason(enum.Enum):
    NO_ROUTE = "NoRoute"
    TTL_EXPIRED = "TtlExpired"


@dataclass(frozen=True)
class LsaLink:
    """One advertised link: an adjacency, or a stub prefix (neighbor None)."""

    neighbor: RouterId | None
    prefix: str
    cost: int
    addr: str | None = None  # origin's interface address on an adjacency


@dataclass(frozen=True)
class Lsa:
    origin: RouterId
    seq: int
    links: tuple[LsaLink, ...]


class LinkStateDb:
    """Latest accepted advertisement per origin."""

    def __init__(self) -> None:
        self.by_origin: dict[RouterId, Lsa] = {}

    def accept(self, lsa: Lsa) -> bool:
        stored = self.by_origin.get(lsa.origin)
        if stored is not None and lsa.seq <= stored.seq:
            return False
        self.by_origin[lsa.origin] = lsa
        return True

    def digest(self) -> tuple:
        return tuple(sorted((str(o), l.seq) for o, l in self.by_origin.items()))

    def __len__(self) -> int:
        return len(self.by_origin)


@dataclass(frozen=True)
class FibEntry:
    prefix: IPv4Network
    next_hop: IPv4Address | None  # None: directly attached, use dst itself
    port: int
    cost: int


class Fib:
    """Longest-prefix-match table, one entry per prefix."""

    def __init__(self) -> None:
        self._by_len: dict[int, dict[IPv4Network, FibEntry]] = {}

    def add(self, entry: FibEntry) -> None:
        bucket = self._by_len.setdefault(entry.prefix.prefixlen, {})
        if entry.prefix in bucket:
            raise ValueError(f"duplicate prefix {entry.prefix}")
        bucket[entry.prefix] = entry

    def __contains__(self, prefix: IPv4Network) -> bool:
        return prefix in self._by_len.get(prefix.prefixlen, {})

    def lookup(self, addr: IPv4Address) -> FibEntry | None:
        for plen in sorted(self._by_len, reverse=True):
            net = IPv4Network((int(addr) >> (32 - plen) << (32 - plen), plen)) \
                if plen else IPv4Network("0.0.0.0/0")
            hit = self._by_len[plen].get(net)
            if hit is not None:
                return hit
        return None

    def entries(self) -> list[FibEntry]:
        out = [e for bucket in self._by_len.values() for e in bucket.values()]
        return sorted(out, key=lambda e: (e.prefix.network_address, e.prefix.prefixlen))

    def __len__(self) -> int:
        return sum(len(b) for b in self._by_len.values())


def run_spf(db: LinkStateDb, self_rid: RouterId,
            first_hops: Mapping[RouterId, tuple[int, IPv4Address]],
            connected: Iterable[tuple[IPv4Network, int]] = ()) -> Fib:
    """Dijkstra over the database, compiled down to a forwarding table.

    ``first_hops`` maps each adjacent router to (out port, its address);
    ``connected`` prefixes are installed as directly attached and shadow
    any advertised copy.  An adjacency only counts when both ends
    advertise it.
    """
    if self_rid not in db.by_origin:
        raise ValueError(f"no self LSA for {self_rid}")

    def advertises(a: RouterId, b: RouterId) -> bool:
        lsa = db.by_origin.get(a)
        return lsa is not None and any(l.neighbor == b for l in lsa.links)

    dist: dict[RouterId, int] = {self_rid: 0}
    first: dict[RouterId, RouterId] = {}
    heap: list[tuple[int, RouterId]] = [(0, self_rid)]
    while heap:
        d, u = heappop(heap)
        if d > dist.get(u, 1 << 60):
            continue
        for link in db.by_origin[u].links:
            v = link.neighbor
            if v is None or v not in db.by_origin or not advertises(v, u):
                continue
            nd = d + link.cost
            fh = first[u] if u != self_rid else v
            if fh not in first_hops:
                continue  # adjacency the caller cannot reach directly
            old = dist.get(v)
            if old is None or nd < old or (nd == old and fh < first[v]):
                dist[v] = nd
                first[v] = fh
                heappush(heap, (nd, v))

    fib = Fib()
    for prefix, port in connected:
        if prefix not in fib:
            fib.add(FibEntry(prefix, None, port, 0))

    # prefix -> (total cost, next-hop rid) with deterministic tie-break
    best: dict[IPv4Network, tuple[int, RouterId]] = {}
    for origin in sorted(dist, key=lambda r: (dist[r], r)):
        if origin == self_rid:
            continue
        for link in db.by_origin[origin].links:
            prefix = IPv4Network(link.prefix)
            total = dist[origin] + link.cost
            cand = (total, first[origin])
            cur = best.get(prefix)
            if cur is None or cand < cur:
                best[prefix] = cand
    for prefix in sorted(best, key=lambda p: (p.network_address, p.prefixlen)):
        if prefix in fib:
            continue
        total, nh_rid = best[prefix]
        port, nh_addr = first_hops[nh_rid]
        fib.add(FibEntry(prefix, nh_addr, port, total))
    return fib


@dataclass
class Interface:
    """A routed point-to-point interface bound to one daemon port."""

    port: int
    addr: IPv4Interface
    cost: int = 1
    passive: bool = False  # advertise the prefix but never speak hello
    enabled: bool = True
    peer_rid: RouterId | None = None
    peer_addr: IPv4Address | None = None
    state: NeighborState = NeighborState.DOWN
    last_heard: float = float("-inf")


@dataclass
class StaticRoute:
    prefix: IPv4Network
    next_hop: IPv4Address
    port: int


def hello_payload(origin: RouterId, addr: IPv4Address,
                  seen: list[str]) -> bytes:
    return json.dumps({"type": "hello", "origin": str(origin),
                       "addr": str(addr), "seen": seen},
                      sort_keys=True).encode()


def lsa_payload(lsa: Lsa) -> bytes:
    links = [[str(l.neighbor) if l.neighbor else None, l.prefix, l.cost, l.addr]
             for l in lsa.links]
    return json.dumps({"type": "lsa", "origin": str(lsa.origin),
                       "seq": lsa.seq, "links": links}, sort_keys=True).encode()


def lsa_from_payload(doc: dict) -> Lsa:
    links = tuple(LsaLink(IPv4Address(n) if n else None, p, c, a)
                  for n, p, c, a in doc["links"])
    return Lsa(IPv4Address(doc["origin"]), int(doc["seq"]), links)


class RoutingDaemon:
    """Hello/flooding/SPF state machine for one node.

    ``send`` emits a routing packet on one of the daemon's ports; the
    owning node wraps it into a frame and pushes it through its data
    plane.  ``active`` is False on customer-edge boxes, which only hold
    connected plus static routes.
    """

    def __init__(self, sim: "Simulation", node_id: str, rid: RouterId,
                 send: Callable[[int, Ipv4Packet], None],
                 active: bool = True, hello_offset: float = 0.0) -> None:
        self.sim = sim
        self.node_id = node_id
        self.rid = rid
        self.send = send
        self.active = active
        self.hello_offset = hello_offset
        self.interfaces: dict[int, Interface] = {}
        self.stub_prefixes: list[tuple[IPv4Network, int]] = [
            (IPv4Network(f"{rid}/32"), 0)]
        self.extra_local: set[IPv4Address] = set()
        self.static_routes: list[StaticRoute] = []
        self.lsdb = LinkStateDb()
        self.fib = Fib()
        self.seq = 0
        self._last_originated = float("-inf")
        self._origination_pending = False
        self.ignored_hellos = 0
        self.on_change: Callable[[], None] | None = None

    # -- lifecycle ----------------------------------------------------

    def add_interface(self, iface: Interface) -> None:
        self.interfaces[iface.port] = iface

    def start(self) -> None:
        self.rebuild_fib()
        if self.active:
            self.originate_lsa()
            self.sim.at(self.sim.now + self.hello_offset, self._hello_tick)

    def _hello_tick(self) -> None:
        for port in sorted(self.interfaces):
            iface = self.interfaces[port]
            if not iface.enabled or iface.passive:
                continue
            seen = []
            if (iface.peer_rid is not None
                    and self.sim.now - iface.last_heard < DEAD_INTERVAL):
                seen.append(str(iface.peer_rid))
            pkt = Ipv4Packet(iface.addr.ip, ALL_ROUTERS_ADDR, 1,
                             IPPROTO_ROUTING,
                             hello_payload(self.rid, iface.addr.ip, seen))
            self.send(port, pkt)
        self.sim.schedule(HELLO_INTERVAL, self._hello_tick)

    # -- hello and adjacency ------------------------------------------

    def process_hello(self, doc: dict, in_port: int) -> NeighborState | None:
        """Returns the new neighbor state, or None if the hello was ignored."""
        iface = self.interfaces.get(in_port)
        if iface is None or not iface.enabled or iface.passive or not self.active:
            self.ignored_hellos += 1
            return None
        iface.peer_rid = IPv4Address(doc["origin"])
        iface.peer_addr = IPv4Address(doc["addr"])
        iface.last_heard = self.sim.now
        new = (NeighborState.UP if str(self.rid) in doc["seen"]
               else NeighborState.INIT)
        old = iface.state
        iface.state = new
        deadline = self.sim.now + DEAD_INTERVAL
        self.sim.at(deadline, lambda: self._dead_check(in_port, deadline))
        if new is NeighborState.UP and old is not NeighborState.UP:
            self.sim.record("adjacency-up",
                            f"{self.node_id} port {in_port} -> {iface.peer_rid}")
            self._sync_db(in_port)
            self.originate_lsa()
            self.rebuild_fib()
        elif new is NeighborState.INIT and old is NeighborState.UP:
            # peer restarted and no longer lists us: adjacency is gone
            self.originate_lsa()
            self.rebuild_fib()
        return new

    def _dead_check(self, port: int, deadline: float) -> None:
        iface = self.interfaces.get(port)
        if iface is None or iface.state is NeighborState.DOWN:
            return
        if iface.last_heard + DEAD_INTERVAL <= deadline:
            self._neighbor_down(iface)

    def _neighbor_down(self, iface: Interface) -> None:
        self.sim.record("adjacency-down",
                        f"{self.node_id} port {iface.port} -> {iface.peer_rid}")
        iface.state = NeighborState.DOWN
        self.originate_lsa()
        self.rebuild_fib()

    def interface_down(self, port: int) -> None:
        iface = self.interfaces[port]
        iface.enabled = False
        if iface.state is not NeighborState.DOWN:
            self._neighbor_down(iface)
        else:
            self.originate_lsa()
            self.rebuild_fib()

    def interface_up(self, port: int) -> None:
        self.interfaces[port].enabled = True
        self.originate_lsa()
        self.rebuild_fib()

    def _sync_db(self, port: int) -> None:
        # bring a fresh adjacency up to date with everything we hold
        for origin in sorted(self.lsdb.by_origin):
            self._send_lsa(self.lsdb.by_origin[origin], only_port=port)

    # -- advertisements ------------------------------------------------

    def originate_lsa(self) -> None:
        if not self.active:
            return
        now = self.sim.now
        if now - self._last_originated < LSA_MIN_INTERVAL:
            if not self._origination_pending:
                self._origination_pending = True
                self.sim.at(self._last_originated + LSA_MIN_INTERVAL,
                            self._deferred_origination)
            return
        self._last_originated = now
        links = []
        for port in sorted(self.interfaces):
            iface = self.interfaces[port]
            if not iface.enabled:
                continue
            prefix = str(iface.addr.network)
            if iface.passive:
                links.append(LsaLink(None, prefix, iface.cost))
            elif iface.state is NeighborState.UP:
                links.append(LsaLink(iface.peer_rid, prefix, iface.cost,
                                     str(iface.addr.ip)))
        for prefix, cost in self.stub_prefixes:
            links.append(LsaLink(None, str(prefix), cost))
        self.seq += 1
        lsa = Lsa(self.rid, self.seq, tuple(links))
        self.lsdb.accept(lsa)
        self.sim.record("lsa-originate", f"{self.node_id} seq {self.seq}")
        self._send_lsa(lsa)
        self.rebuild_fib()

    def _deferred_origination(self) -> None:
        self._origination_pending = False
        self.originate_lsa()

    def _send_lsa(self, lsa: Lsa, except_port: int | None = None,
                  only_port: int | None = None) -> set[int]:
        sent: set[int] = set()
        for port in sorted(self.interfaces):
            iface = self.interfaces[port]
            if port == except_port or (only_port is not None and port != only_port):
                continue
            if not iface.enabled or iface.passive:
                continue
            if iface.state is not NeighborState.UP:
                continue
            pkt = Ipv4Packet(iface.addr.ip, ALL_ROUTERS_ADDR, 1,
                             IPPROTO_ROUTING, lsa_payload(lsa))
            self.send(port, pkt)
            sent.add(port)
        return sent

    def flood_lsa(self, lsa: Lsa, in_port: int | None) -> set[int]:
        """Store-and-forward: newer sequence numbers propagate, stale die."""
        if not self.lsdb.accept(lsa):
            return set()
        sent = self._send_lsa(lsa, except_port=in_port)
        self.rebuild_fib()
        return sent

    # -- forwarding ----------------------------------------------------

    def rebuild_fib(self) -> None:
        connected = []
        local_nets: set[IPv4Network] = set()
        for port in sorted(self.interfaces):
            iface = self.interfaces[port]
            if iface.enabled:
                connected.append((iface.addr.network, port))
                local_nets.add(iface.addr.network)
        if self.active and self.rid in self.lsdb.by_origin:
            first_hops = {
                i.peer_rid: (i.port, i.peer_addr)
                for i in self.interfaces.values()
                if i.enabled and i.state is NeighborState.UP
                and i.peer_rid is not None
            }
            fib = run_spf(self.lsdb, self.rid, first_hops, connected)
        else:
            fib = Fib()
            for prefix, port in connected:
                if prefix not in fib:
                    fib.add(FibEntry(prefix, None, port, 0))
            fib.add(FibEntry(IPv4Network(f"{self.rid}/32"), None, -1, 0))
        for route in self.static_routes:
            if route.prefix not in fib:
                fib.add(FibEntry(route.prefix, route.next_hop, route.port, 1))
        self.fib = fib
        if self.on_change is not None:
            self.on_change()

    def local_addrs(self) -> set[IPv4Address]:
        addrs = {self.rid, ALL_ROUTERS_ADDR}
        addrs.update(self.extra_local)
        addrs.update(i.addr.ip for i in self.interfaces.values())
        return addrs

    def forward_ip(self, packet: Ipv4Packet, in_port: int | None):
        """Route one packet: ('deliver', None) | ('drop', reason) |
        ('forward', (out port, packet with ttl-1, next-hop address))."""
        if packet.dst in self.local_addrs():
            return ("deliver", None)
        entry = self.fib.lookup(packet.dst)
        if entry is None or entry.port < 0:
            return ("drop", DropReason.NO_ROUTE)
        if packet.ttl <= 1:
            return ("drop", DropReason.TTL_EXPIRED)
        fwd = Ipv4Packet(packet.src, packet.dst, packet.ttl - 1,
                         packet.protocol, packet.payload)
        next_hop = entry.next_hop if entry.next_hop is not None else packet.dst
        return ("forward", (entry.port, fwd, next_hop))

    def dump_rib(self) -> list[dict]:
        return [{"prefix": str(e.prefix),
                 "next_hop": str(e.next_hop) if e.next_hop else None,
                 "port": e.port, "cost": e.cost}
                for e in self.fib.entries()]
