"""Multi-table match/action pipeline: the SDN capable switch in every node.

Three fixed tables: table 0 classifies (coexistence, ingress policy,
bootstrap), table 1 forwards service paths, table 2 is reserved for
mirroring IP routes into the switch (not populated today).  Table miss
drops unless an explicit wildcard says otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .netmodel import (
    EthernetFrame,
    MacAddr,
    VlanTag,
    vlan_pop,
    vlan_push,
    vlan_set,
)

NUM_TABLES = 3

#: marker for "match only untagged frames" (None means "don't care")
VID_ABSENT = "absent"

#: emission target for packet-in to the controller channel
CONTROLLER = "controller"


class FlowInstallError(ValueError):
    """Entry rejected: bad table, unknown port or invalid action."""


@dataclass(frozen=True)
class FlowMatch:
    in_port: int | None = None
    vlan_vid: int | str | None = None  # int vid, VID_ABSENT, or None (any)
    ethertype: int | None = None
    eth_dst: MacAddr | None = None

    def matches(self, frame: EthernetFrame, in_port: int) -> bool:
        if self.in_port is not None and self.in_port != in_port:
            return False
        if self.vlan_vid == VID_ABSENT:
            if frame.tag is not None:
                return False
        elif self.vlan_vid is not None:
            if frame.tag is None or frame.tag.vid != self.vlan_vid:
                return False
        if self.ethertype is not None and self.ethertype != frame.ethertype:
            return False
        if self.eth_dst is not None and self.eth_dst != frame.dst:
            return False
        return True


@dataclass(frozen=True)
class Output:
    port: int


@dataclass(frozen=True)
class OutputController:
    pass


@dataclass(frozen=True)
class PushVlan:
    vid: int


@dataclass(frozen=True)
class PopVlan:
    pass


@dataclass(frozen=True)
class SetVlan:
    vid: int


@dataclass(frozen=True)
class GotoTable:
    table: int


@dataclass(frozen=True)
class Drop:
    pass


FlowAction = Union[Output, OutputController, PushVlan, PopVlan, SetVlan,
                   GotoTable, Drop]


@dataclass
class FlowEntry:
    table_id: int
    priority: int
    match: FlowMatch
    actions: tuple[FlowAction, ...]
    cookie: int = 0
    packets: int = 0
    bytes: int = 0
    handle: int = 0
    seq: int = 0  # install order, breaks equal-priority ties

    def key(self) -> tuple:
        return (self.table_id, self.priority, self.match)


@dataclass
class SwitchCounters:
    packets_in: int = 0
    packets_emitted: int = 0
    packets_dropped: int = 0
    packets_to_controller: int = 0


@dataclass
class SwitchState:
    """Flow tables plus the port set they may reference."""

    datapath_id: int
    ports: set[int] = field(default_factory=set)
    tables: list[list[FlowEntry]] = field(
        default_factory=lambda: [[] for _ in range(NUM_TABLES)])
    counters: SwitchCounters = field(default_factory=SwitchCounters)
    _seq: int = 0
    _next_handle: int = 1
    _version: int = 0
    _memo: dict = field(default_factory=dict)

    def rule_count(self) -> int:
        return sum(len(t) for t in self.tables)

    def dump(self) -> list[dict]:
        """One JSON-ready object per entry, in table/priority order."""
        out = []
        for table in self.tables:
            for e in table:
                out.append(entry_to_json(e))
        return out


def _validate(switch: SwitchState, entry: FlowEntry) -> None:
    if not 0 <= entry.table_id < NUM_TABLES:
        raise FlowInstallError(f"table {entry.table_id} out of range")
    if entry.priority < 0:
        raise FlowInstallError("priority must be >= 0")
    for act in entry.actions:
        if isinstance(act, Output) and act.port not in switch.ports:
            raise FlowInstallError(
                f"output to unknown port {act.port} on dpid {switch.datapath_id}")
        if isinstance(act, GotoTable):
            if act.table <= entry.table_id or act.table >= NUM_TABLES:
                raise FlowInstallError(
                    f"goto table {act.table} from table {entry.table_id}")
        if isinstance(act, (PushVlan, SetVlan)):
            VlanTag(act.vid)  # range check


def install_flow(switch: SwitchState, entry: FlowEntry) -> int:
    """Install or replace the entry with the same (table, priority, match)."""
    _validate(switch, entry)
    table = switch.tables[entry.table_id]
    for existing in table:
        if existing.key() == entry.key():
            existing.actions = entry.actions
            existing.cookie = entry.cookie
            switch._version += 1
            switch._memo.clear()
            return existing.handle
    entry.seq = switch._seq
    entry.handle = switch._next_handle
    switch._seq += 1
    switch._next_handle += 1
    table.append(entry)
    table.sort(key=lambda e: (-e.priority, e.seq))
    switch._version += 1
    switch._memo.clear()
    return entry.handle


def delete_flows(switch: SwitchState, cookie: int) -> int:
    """Remove every entry carrying the cookie; returns how many."""
    deleted = 0
    for i, table in enumerate(switch.tables):
        kept = [e for e in table if e.cookie != cookie]
        deleted += len(table) - len(kept)
        switch.tables[i] = kept
    if deleted:
        switch._version += 1
        switch._memo.clear()
    return deleted


def _lookup(switch: SwitchState, table_id: int, frame: EthernetFrame,
            in_port: int) -> FlowEntry | None:
    tag_key = frame.tag.vid if frame.tag is not None else VID_ABSENT
    memo_key = (table_id, in_port, tag_key, frame.ethertype, frame.dst.octets)
    hit = switch._memo.get(memo_key)
    if hit is not None:
        return hit[0]
    for entry in switch.tables[table_id]:  # sorted by (-priority, seq)
        if entry.match.matches(frame, in_port):
            switch._memo[memo_key] = (entry,)
            return entry
    switch._memo[memo_key] = (None,)
    return None


def pipeline_process(switch: SwitchState, frame: EthernetFrame,
                     in_port: int) -> list[tuple[int | str, EthernetFrame]]:
    """Run a frame through the tables; returns (port|CONTROLLER, frame) emissions.

    Highest priority wins within a table, ties go to the earliest install.
    GotoTable rematches the frame as mutated so far; a miss drops.
    """
    if in_port not in switch.ports:
        raise FlowInstallError(f"unknown in_port {in_port}")
    switch.counters.packets_in += 1
    emissions: list[tuple[int | str, EthernetFrame]] = []
    table: int | None = 0
    cur = frame
    while table is not None:
        entry = _lookup(switch, table, cur, in_port)
        if entry is None:
            break
        entry.packets += 1
        entry.bytes += len(cur)
        table = None
        stop = False
        for act in entry.actions:
            if isinstance(act, Output):
                emissions.append((act.port, cur))
            elif isinstance(act, OutputController):
                emissions.append((CONTROLLER, cur))
            elif isinstance(act, PushVlan):
                cur = vlan_push(cur, VlanTag(act.vid))
            elif isinstance(act, PopVlan):
                cur = vlan_pop(cur)
            elif isinstance(act, SetVlan):
                cur = vlan_set(cur, act.vid)
            elif isinstance(act, GotoTable):
                table = act.table
            elif isinstance(act, Drop):
                stop = True
                break
        if stop:
            table = None
    if any(target != CONTROLLER for target, _ in emissions):
        switch.counters.packets_emitted += 1
    elif emissions:
        switch.counters.packets_to_controller += 1
    else:
        switch.counters.packets_dropped += 1
    return emissions


# --- JSON forms (rule dump, flow-push API bodies) ---

_ACTION_TAGS = {
    Output: "output", OutputController: "controller", PushVlan: "push_vlan",
    PopVlan: "pop_vlan", SetVlan: "set_vlan", GotoTable: "goto_table",
    Drop: "drop",
}


def action_to_json(act: FlowAction) -> dict:
    d: dict = {"type": _ACTION_TAGS[type(act)]}
    if isinstance(act, Output):
        d["port"] = act.port
    elif isinstance(act, (PushVlan, SetVlan)):
        d["vid"] = act.vid
    elif isinstance(act, GotoTable):
        d["table"] = act.table
    return d


def action_from_json(d: dict) -> FlowAction:
    t = d.get("type")
    if t == "output":
        return Output(int(d["port"]))
    if t == "controller":
        return OutputController()
    if t == "push_vlan":
        return PushVlan(int(d["vid"]))
    if t == "pop_vlan":
        return PopVlan()
    if t == "set_vlan":
        return SetVlan(int(d["vid"]))
    if t == "goto_table":
        return GotoTable(int(d["table"]))
    if t == "drop":
        return Drop()
    raise FlowInstallError(f"unknown action {d!r}")


def match_to_json(m: FlowMatch) -> dict:
    d: dict = {}
    if m.in_port is not None:
        d["in_port"] = m.in_port
    if m.vlan_vid is not None:
        d["vlan_vid"] = m.vlan_vid
    if m.ethertype is not None:
        d["ethertype"] = m.ethertype
    if m.eth_dst is not None:
        d["eth_dst"] = str(m.eth_dst)
    return d


def match_from_json(d: dict) -> FlowMatch:
    vid = d.get("vlan_vid")
    if vid is not None and vid != VID_ABSENT:
        vid = int(vid)
    dst = d.get("eth_dst")
    return FlowMatch(
        in_port=d.get("in_port"),
        vlan_vid=vid,
        ethertype=d.get("ethertype"),
        eth_dst=MacAddr.parse(dst) if dst else None,
    )


def entry_to_json(e: FlowEntry) -> dict:
    return {
        "table": e.table_id,
        "priority": e.priority,
        "match": match_to_json(e.match),
        "actions": [action_to_json(a) for a in e.actions],
        "cookie": e.cookie,
        "counters": {"packets": e.packets, "bytes": e.bytes},
    }


def entry_from_json(d: dict) -> FlowEntry:
    return FlowEntry(
        table_id=int(d["table"]),
        priority=int(d["priority"]),
        match=match_from_json(d.get("match", {})),
        actions=tuple(action_from_json(a) for a in d.get("actions", [])),
        cookie=int(d.get("cookie", 0)),
    )
