"""Deterministic simulator of hybrid IP/SDN provider networks."""

from .costs import DEFAULT_MODEL, CalibrationError, CostModel, calibrate
from .netmodel import (
    EthernetFrame,
    Ipv4Packet,
    MacAddr,
    VlanTag,
    decode_frame,
    encode_frame,
    vlan_pop,
    vlan_push,
    vlan_set,
)
from .topo import (
    Deployment,
    SchemaError,
    TopologyDoc,
    deploy,
    generate_topology,
    parse_topology,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError", "CostModel", "DEFAULT_MODEL", "Deployment",
    "EthernetFrame", "Ipv4Packet", "MacAddr", "SchemaError", "TopologyDoc",
    "VlanTag", "calibrate", "decode_frame", "deploy", "encode_frame",
    "generate_topology", "parse_topology", "vlan_pop", "vlan_push",
    "vlan_set", "__version__",
]
