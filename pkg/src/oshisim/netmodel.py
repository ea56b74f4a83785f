"""Value types for frames, packets, addresses, ports and links.

Everything here is immutable and hashable; the data plane, the flow engine
and the file formats all share these types.  Canonical text forms are
"aa:bb:cc:dd:ee:ff" for MACs and dotted quads for IPv4.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, replace
from ipaddress import IPv4Address

MAX_PAYLOAD = 9000  # jumbo frames, leaves headroom for encapsulation

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_VLAN = 0x8100
ETHERTYPE_PROBE = 0x88B5  # local experimental; used by topology discovery

IPPROTO_UDP = 17
IPPROTO_ROUTING = 89
IPPROTO_CONTROL = 253  # in-band node-to-controller channel

#: vids never handed out to services or IP coexistence
RESERVED_VIDS = frozenset({0, 4095})

ALL_ROUTERS_ADDR = IPv4Address("224.0.0.5")  # link-local routing multicast


class FrameError(ValueError):
    """Malformed, truncated or oversize frame data."""


class VlanOpError(ValueError):
    """VLAN push/pop/set applied to a frame in the wrong tagging state."""


@dataclass(frozen=True, order=True)
class MacAddr:
    """A 48-bit Ethernet address."""

    octets: bytes

    def __post_init__(self) -> None:
        if len(self.octets) != 6:
            raise ValueError(f"MAC needs 6 octets, got {len(self.octets)}")

    @classmethod
    def parse(cls, text: str) -> "MacAddr":
        parts = text.split(":")
        if len(parts) != 6:
            raise ValueError(f"bad MAC {text!r}")
        return cls(bytes(int(p, 16) for p in parts))

    @property
    def is_broadcast(self) -> bool:
        return self.octets == b"\xff" * 6

    @property
    def is_multicast(self) -> bool:
        return bool(self.octets[0] & 0x01)

    @property
    def locally_administered(self) -> bool:
        return bool(self.octets[0] & 0x02)

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)


BROADCAST_MAC = MacAddr(b"\xff" * 6)
ALL_ROUTERS_MAC = MacAddr.parse("01:00:5e:00:00:05")


def node_mac(node_index: int, port: int) -> MacAddr:
    """Deterministic per-port MAC with the locally-administered bit set."""
    return MacAddr(bytes([0x02, 0x00, (node_index >> 8) & 0xFF,
                          node_index & 0xFF, (port >> 8) & 0xFF, port & 0xFF]))


@dataclass(frozen=True)
class VlanTag:
    """An 802.1Q tag: 12-bit vid plus 3-bit priority code point."""

    vid: int
    pcp: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.vid <= 4095:
            raise ValueError(f"vid {self.vid} out of range")
        if not 0 <= self.pcp <= 7:
            raise ValueError(f"pcp {self.pcp} out of range")


@dataclass(frozen=True)
class EthernetFrame:
    """An Ethernet II frame with at most one 802.1Q tag."""

    dst: MacAddr
    src: MacAddr
    ethertype: int
    payload: bytes = b""
    tag: VlanTag | None = None

    def __len__(self) -> int:
        return 14 + (4 if self.tag is not None else 0) + len(self.payload)


def encode_frame(frame: EthernetFrame) -> bytes:
    """Serialize to the 802.3/802.1Q wire layout."""
    if len(frame.payload) > MAX_PAYLOAD:
        raise FrameError(f"payload {len(frame.payload)} exceeds {MAX_PAYLOAD}")
    if frame.tag is None and frame.ethertype == ETHERTYPE_VLAN:
        raise FrameError("untagged frame with the 802.1Q ethertype "
                         "has no wire form")
    head = frame.dst.octets + frame.src.octets
    if frame.tag is not None:
        tci = (frame.tag.pcp << 13) | frame.tag.vid
        head += struct.pack("!HH", ETHERTYPE_VLAN, tci)
    head += struct.pack("!H", frame.ethertype)
    return head + frame.payload


def decode_frame(data: bytes) -> EthernetFrame:
    """Inverse of :func:`encode_frame`."""
    if len(data) < 14:
        raise FrameError(f"frame truncated at {len(data)} bytes")
    dst = MacAddr(bytes(data[0:6]))
    src = MacAddr(bytes(data[6:12]))
    (outer,) = struct.unpack_from("!H", data, 12)
    if outer == ETHERTYPE_VLAN:
        if len(data) < 18:
            raise FrameError("tagged header on short frame")
        (tci, ethertype) = struct.unpack_from("!HH", data, 14)
        tag = VlanTag(vid=tci & 0x0FFF, pcp=tci >> 13)
        return EthernetFrame(dst, src, ethertype, bytes(data[18:]), tag)
    return EthernetFrame(dst, src, outer, bytes(data[14:]))


def vlan_push(frame: EthernetFrame, tag: VlanTag) -> EthernetFrame:
    """Add a tag to an untagged frame; payload and MACs untouched."""
    if frame.tag is not None:
        raise VlanOpError("push on already-tagged frame")
    return replace(frame, tag=tag)


def vlan_pop(frame: EthernetFrame) -> EthernetFrame:
    """Strip the tag from a tagged frame."""
    if frame.tag is None:
        raise VlanOpError("pop on untagged frame")
    return replace(frame, tag=None)


def vlan_set(frame: EthernetFrame, vid: int) -> EthernetFrame:
    """Rewrite the vid of a tagged frame, keeping its pcp."""
    if frame.tag is None:
        raise VlanOpError("set on untagged frame")
    return replace(frame, tag=VlanTag(vid=vid, pcp=frame.tag.pcp))


@dataclass(frozen=True)
class Ipv4Packet:
    """A minimal IPv4 datagram (no options, checksum or fragmentation)."""

    src: IPv4Address
    dst: IPv4Address
    ttl: int
    protocol: int
    payload: bytes = b""

    def __post_init__(self) -> None:
        if not 0 <= self.ttl <= 255:
            raise ValueError(f"ttl {self.ttl} out of range")
        if not 0 <= self.protocol <= 255:
            raise ValueError(f"protocol {self.protocol} out of range")


def encode_packet(pkt: Ipv4Packet) -> bytes:
    """Serialize to a 20-byte header (checksum field zero) plus payload."""
    total = 20 + len(pkt.payload)
    head = struct.pack(
        "!BBHHHBBH4s4s",
        0x45, 0, total, 0, 0, pkt.ttl, pkt.protocol, 0,
        pkt.src.packed, pkt.dst.packed,
    )
    return head + pkt.payload


def decode_packet(data: bytes) -> Ipv4Packet:
    """Inverse of :func:`encode_packet`."""
    if len(data) < 20:
        raise FrameError(f"packet truncated at {len(data)} bytes")
    (vihl, _tos, total, _ident, _frag, ttl, proto, _csum, src,
     dst) = struct.unpack_from("!BBHHHBBH4s4s", data, 0)
    if vihl != 0x45:
        raise FrameError(f"unsupported version/ihl 0x{vihl:02x}")
    return Ipv4Packet(IPv4Address(src), IPv4Address(dst), ttl, proto,
                      bytes(data[20:total]))


class PortKind(enum.Enum):
    PHYSICAL = "physical"
    VIRTUAL = "virtual"
    TUNNEL = "tunnel"


@dataclass(frozen=True)
class PortId:
    """A node-local port identifier."""

    id: int
    kind: PortKind

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.id}"


@dataclass(frozen=True)
class LinkSpec:
    """One point-to-point link between two node ports.

    ``capacity_pps`` is carried for documentation; the cost model, not the
    link, is what saturates in the experiments.
    """

    link_id: str
    a: tuple[str, int]  # (node id, port number)
    b: tuple[str, int]
    cost: int = 1
    delay: float = 0.001
    capacity_pps: int | None = None
    overlay: str = "none"  # none | vxlan | vpn

    def __post_init__(self) -> None:
        if self.a[0] == self.b[0]:
            raise ValueError(f"link {self.link_id} endpoints on same node")
        if self.cost < 1:
            raise ValueError(f"link {self.link_id} cost must be >= 1")
        if self.overlay not in ("none", "vxlan", "vpn"):
            raise ValueError(f"link {self.link_id} unknown overlay {self.overlay}")

    def peer_of(self, node: str) -> tuple[str, int]:
        if node == self.a[0]:
            return self.b
        if node == self.b[0]:
            return self.a
        raise KeyError(f"{node} not on link {self.link_id}")

    def port_of(self, node: str) -> int:
        if node == self.a[0]:
            return self.a[1]
        if node == self.b[0]:
            return self.b[1]
        raise KeyError(f"{node} not on link {self.link_id}")
