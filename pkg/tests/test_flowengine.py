import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oshisim.flowengine import (
    CONTROLLER,
    VID_ABSENT,
    Drop,
    FlowEntry,
    FlowInstallError,
    FlowMatch,
    GotoTable,
    Output,
    OutputController,
    PopVlan,
    PushVlan,
    SetVlan,
    SwitchState,
    delete_flows,
    entry_from_json,
    entry_to_json,
    install_flow,
    pipeline_process,
)
from oshisim.netmodel import EthernetFrame, MacAddr, VlanTag

MAC = MacAddr.parse("02:00:00:00:00:01")
MAC2 = MacAddr.parse("02:00:00:00:00:02")


def fresh_switch(ports=(1, 2, 101, 102)) -> SwitchState:
    return SwitchState(datapath_id=1, ports=set(ports))


def frame(ethertype=0x0800, vid=None, payload=b"x") -> EthernetFrame:
    tag = VlanTag(vid) if vid is not None else None
    return EthernetFrame(MAC, MAC2, ethertype, payload, tag)


class TestInstall:
    def test_wildcard_miss_falls_through_to_next_table(self):
        sw = fresh_switch()
        install_flow(sw, FlowEntry(0, 0, FlowMatch(), (GotoTable(1),)))
        install_flow(sw, FlowEntry(1, 5, FlowMatch(), (Output(2),)))
        assert pipeline_process(sw, frame(), 1) == [(2, frame())]

    def test_duplicate_key_replaces_actions_not_count(self):
        sw = fresh_switch()
        h1 = install_flow(sw, FlowEntry(0, 7, FlowMatch(in_port=1),
                                        (Output(2),), cookie=1))
        before = sw.rule_count()
        h2 = install_flow(sw, FlowEntry(0, 7, FlowMatch(in_port=1),
                                        (Drop(),), cookie=9))
        assert sw.rule_count() == before
        assert h1 == h2
        assert pipeline_process(sw, frame(), 1) == []

    def test_goto_must_increase_table_id(self):
        sw = fresh_switch()
        with pytest.raises(FlowInstallError):
            install_flow(sw, FlowEntry(1, 1, FlowMatch(), (GotoTable(0),)))
        with pytest.raises(FlowInstallError):
            install_flow(sw, FlowEntry(1, 1, FlowMatch(), (GotoTable(1),)))

    def test_output_to_unknown_port_rejected(self):
        sw = fresh_switch()
        with pytest.raises(FlowInstallError):
            install_flow(sw, FlowEntry(0, 1, FlowMatch(), (Output(42),)))

    def test_bad_table_rejected(self):
        sw = fresh_switch()
        with pytest.raises(FlowInstallError):
            install_flow(sw, FlowEntry(3, 1, FlowMatch(), (Drop(),)))


class TestDelete:
    def test_delete_unknown_cookie_is_zero(self):
        assert delete_flows(fresh_switch(), 12345) == 0

    def test_delete_by_cookie_counts(self):
        sw = fresh_switch()
        for i in range(4):
            install_flow(sw, FlowEntry(0, i + 1, FlowMatch(in_port=1,
                                                           vlan_vid=i + 10),
                                       (Drop(),), cookie=7))
        install_flow(sw, FlowEntry(0, 99, FlowMatch(), (Drop(),), cookie=8))
        assert delete_flows(sw, 7) == 4
        assert sw.rule_count() == 1

    def test_delete_leaves_other_cookies(self):
        sw = fresh_switch()
        install_flow(sw, FlowEntry(0, 1, FlowMatch(in_port=1), (Drop(),),
                                   cookie=1))
        install_flow(sw, FlowEntry(0, 2, FlowMatch(in_port=2), (Output(1),),
                                   cookie=2))
        delete_flows(sw, 1)
        assert pipeline_process(sw, frame(), 2) == [(1, frame())]


class TestPipeline:
    def test_untagged_coexistence_to_virtual_port(self):
        # the default table-0 rule set of an access-less hybrid node
        sw = fresh_switch()
        install_flow(sw, FlowEntry(0, 500,
                                   FlowMatch(in_port=1, vlan_vid=VID_ABSENT,
                                             ethertype=0x0800),
                                   (Output(101),)))
        out = pipeline_process(sw, frame(payload=b"ip packet"), 1)
        assert out == [(101, frame(payload=b"ip packet"))]

    def test_vll_transit_swaps_vid(self):
        sw = fresh_switch()
        install_flow(sw, FlowEntry(0, 0, FlowMatch(), (GotoTable(1),)))
        install_flow(sw, FlowEntry(1, 400, FlowMatch(in_port=1, vlan_vid=55),
                                   (SetVlan(71), Output(2))))
        out = pipeline_process(sw, frame(vid=55), 1)
        assert out == [(2, frame(vid=71))]

    def test_drop_action_counts(self):
        sw = fresh_switch()
        install_flow(sw, FlowEntry(0, 1, FlowMatch(), (Drop(),)))
        assert pipeline_process(sw, frame(), 1) == []
        assert sw.counters.packets_dropped == 1

    def test_table_miss_drops(self):
        sw = fresh_switch()
        assert pipeline_process(sw, frame(), 1) == []
        assert sw.counters.packets_dropped == 1

    def test_goto_rematches_mutated_frame(self):
        sw = fresh_switch()
        install_flow(sw, FlowEntry(0, 10, FlowMatch(vlan_vid=VID_ABSENT),
                                   (PushVlan(33), GotoTable(1))))
        install_flow(sw, FlowEntry(1, 10, FlowMatch(vlan_vid=33),
                                   (Output(2),)))
        out = pipeline_process(sw, frame(), 1)
        assert out == [(2, frame(vid=33))]

    def test_controller_emission(self):
        sw = fresh_switch()
        install_flow(sw, FlowEntry(0, 1, FlowMatch(ethertype=0x88B5),
                                   (OutputController(),)))
        out = pipeline_process(sw, frame(ethertype=0x88B5), 1)
        assert out == [(CONTROLLER, frame(ethertype=0x88B5))]
        assert sw.counters.packets_to_controller == 1

    def test_unknown_in_port_rejected(self):
        with pytest.raises(FlowInstallError):
            pipeline_process(fresh_switch(), frame(), 9)

    def test_equal_priority_tie_goes_to_earliest_install(self):
        sw = fresh_switch()
        install_flow(sw, FlowEntry(0, 5, FlowMatch(in_port=1), (Output(2),)))
        install_flow(sw, FlowEntry(0, 5, FlowMatch(ethertype=0x0800),
                                   (Drop(),)))
        assert pipeline_process(sw, frame(), 1) == [(2, frame())]

    def test_pop_and_set_in_actions(self):
        sw = fresh_switch()
        install_flow(sw, FlowEntry(0, 5, FlowMatch(vlan_vid=44),
                                   (PopVlan(), Output(1))))
        assert pipeline_process(sw, frame(vid=44), 2) == [(1, frame())]

    def test_determinism_replay(self, rng):
        sw = fresh_switch(ports=set(range(1, 9)))
        for i in range(30):
            match = FlowMatch(
                in_port=rng.choice([None, 1, 2, 3]),
                vlan_vid=rng.choice([None, VID_ABSENT, 10, 20]),
                ethertype=rng.choice([None, 0x0800, 0x1234]))
            install_flow(sw, FlowEntry(0, rng.randint(0, 20), match,
                                       (Output(rng.randint(1, 8)),),
                                       cookie=i))
        frames = [frame(vid=rng.choice([None, 10, 20]),
                        ethertype=rng.choice([0x0800, 0x1234]),
                        payload=rng.randbytes(10)) for _ in range(200)]
        first = [pipeline_process(sw, f, rng.randint(1, 8)) for f in frames]
        rng2 = random.Random(0xC0FFEE)
        sw2 = fresh_switch(ports=set(range(1, 9)))
        for i in range(30):
            match = FlowMatch(
                in_port=rng2.choice([None, 1, 2, 3]),
                vlan_vid=rng2.choice([None, VID_ABSENT, 10, 20]),
                ethertype=rng2.choice([None, 0x0800, 0x1234]))
            install_flow(sw2, FlowEntry(0, rng2.randint(0, 20), match,
                                        (Output(rng2.randint(1, 8)),),
                                        cookie=i))
        frames2 = [frame(vid=rng2.choice([None, 10, 20]),
                         ethertype=rng2.choice([0x0800, 0x1234]),
                         payload=rng2.randbytes(10)) for _ in range(200)]
        second = [pipeline_process(sw2, f, rng2.randint(1, 8))
                  for f in frames2]
        assert first == second

    def test_counter_conservation(self, rng):
        sw = fresh_switch()
        install_flow(sw, FlowEntry(0, 500, FlowMatch(in_port=1), (Output(2),)))
        install_flow(sw, FlowEntry(0, 400, FlowMatch(ethertype=0x88B5),
                                   (OutputController(),)))
        for _ in range(300):
            pipeline_process(sw, frame(ethertype=rng.choice([0x0800, 0x88B5]),
                                       vid=rng.choice([None, 3])),
                             rng.choice([1, 2]))
        c = sw.counters
        assert c.packets_in == (c.packets_emitted + c.packets_dropped
                                + c.packets_to_controller)
        assert c.packets_in == 300


@settings(max_examples=150, deadline=None)
@given(prio_a=st.integers(1, 100), prio_b=st.integers(1, 100),
       out_a=st.sampled_from([1, 2]), out_b=st.sampled_from([1, 2]),
       in_port=st.sampled_from([1, 2]))
def test_priority_semantics_property(prio_a, prio_b, out_a, out_b, in_port):
    # two overlapping entries: the higher priority one's actions apply
    if prio_a == prio_b:
        return
    sw = fresh_switch()
    install_flow(sw, FlowEntry(0, prio_a, FlowMatch(in_port=in_port),
                               (Output(out_a),)))
    install_flow(sw, FlowEntry(0, prio_b, FlowMatch(ethertype=0x0800),
                               (Output(out_b),)))
    out = pipeline_process(sw, frame(), in_port)
    winner = out_a if prio_a > prio_b else out_b
    assert out == [(winner, frame())]


def test_entry_json_round_trip():
    entry = FlowEntry(0, 600, FlowMatch(in_port=3, vlan_vid=VID_ABSENT),
                      (PushVlan(7), GotoTable(1)), cookie=0x1001)
    doc = entry_to_json(entry)
    back = entry_from_json(doc)
    assert back.key() == entry.key()
    assert back.actions == entry.actions
    assert back.cookie == entry.cookie


def test_dump_shape():
    sw = fresh_switch()
    install_flow(sw, FlowEntry(0, 1, FlowMatch(in_port=1, vlan_vid=5),
                               (SetVlan(6), Output(2)), cookie=3))
    pipeline_process(sw, frame(vid=5), 1)
    (dump,) = sw.dump()
    assert dump["match"] == {"in_port": 1, "vlan_vid": 5}
    assert dump["actions"] == [{"type": "set_vlan", "vid": 6},
                               {"type": "output", "port": 2}]
    assert dump["counters"]["packets"] == 1
    assert dump["cookie"] == 3
