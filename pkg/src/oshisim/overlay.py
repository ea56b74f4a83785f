"""Point-to-point Ethernet-over-UDP tunnel ports.

Each tunnel carries exactly one link and its VNI names that link, so no
flood-and-learn or underlay multicast exists here.  The userspace-VPN
variant runs the identical encapsulation and differs only in what the
cost model charges for it.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from ipaddress import IPv4Address

from .netmodel import (
    EthernetFrame,
    FrameError,
    decode_frame,
    encode_frame,
    node_mac,
)

VXLAN_UDP_PORT = 4789
#: outer Ethernet 14 + IPv4 20 + UDP 8 + tunnel header 8
TUNNEL_OVERHEAD = 50
MTU = 9000


class TunnelError(ValueError):
    """Oversize inner frame or malformed datagram."""


class VniMismatch(TunnelError):
    """Datagram arrived on a tunnel with a different VNI."""


class TunnelKind(enum.Enum):
    VXLAN_KERNEL = "vxlan"
    USERSPACE_VPN = "vpn"


@dataclass
class TunnelPort:
    """One end of a point-to-point overlay link, paired to a switch port."""

    port: int
    vni: int
    kind: TunnelKind
    local: IPv4Address
    remote: IPv4Address
    decap_drops: int = field(default=0)

    def __post_init__(self) -> None:
        if not 0 < self.vni < (1 << 24):
            raise ValueError(f"vni {self.vni} out of 24-bit range")


@dataclass(frozen=True)
class VxlanDatagram:
    outer_src: IPv4Address
    outer_dst: IPv4Address
    vni: int
    inner: bytes

    def encode(self) -> bytes:
        outer_eth = (node_mac(0xFFFF, 1).octets + node_mac(0xFFFF, 2).octets
                     + struct.pack("!H", 0x0800))
        total = 20 + 8 + 8 + len(self.inner)
        ip = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total, 0, 0, 64, 17, 0,
                         self.outer_src.packed, self.outer_dst.packed)
        sport = 49152 + (self.vni % 16384)  # deterministic source port
        udp = struct.pack("!HHHH", sport, VXLAN_UDP_PORT, 8 + 8 + len(self.inner), 0)
        head = struct.pack("!B3s3sB", 0x08, b"\x00\x00\x00",
                           self.vni.to_bytes(3, "big"), 0)
        return outer_eth + ip + udp + head + self.inner


def decode_datagram(data: bytes) -> VxlanDatagram:
    if len(data) < TUNNEL_OVERHEAD:
        raise TunnelError(f"datagram truncated at {len(data)} bytes")
    src = IPv4Address(bytes(data[26:30]))
    dst = IPv4Address(bytes(data[30:34]))
    flags, _r0, vni_bytes, _r1 = struct.unpack_from("!B3s3sB", data, 42)
    if flags != 0x08:
        raise TunnelError(f"bad tunnel header flags 0x{flags:02x}")
    return VxlanDatagram(src, dst, int.from_bytes(vni_bytes, "big"),
                         bytes(data[50:]))


def encap(tunnel: TunnelPort, frame: EthernetFrame) -> VxlanDatagram:
    """Wrap a frame for the wire; caller charges the encap half-cost."""
    if len(frame) > MTU - TUNNEL_OVERHEAD:
        raise TunnelError(
            f"inner frame {len(frame)} exceeds {MTU - TUNNEL_OVERHEAD}")
    return VxlanDatagram(tunnel.local, tunnel.remote, tunnel.vni,
                         encode_frame(frame))


def decap(tunnel: TunnelPort, datagram: VxlanDatagram) -> EthernetFrame:
    """Unwrap; the inner frame comes back bit-exact."""
    if datagram.vni != tunnel.vni:
        tunnel.decap_drops += 1
        raise VniMismatch(
            f"vni {datagram.vni} on tunnel with vni {tunnel.vni}")
    try:
        return decode_frame(datagram.inner)
    except FrameError as exc:
        raise TunnelError(f"bad inner frame: {exc}") from exc
