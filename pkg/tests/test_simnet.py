import random

import pytest

from dynlabel import (Network, PortAssignment, ScenarioEvent, format_scenario,
                      parse_scenario)
from dynlabel.simnet import DeadNeighborError, InvalidEvent

from _util import build_net


class FixedPorts:
    """Adversary stand-in handing out a scripted port sequence."""

    def __init__(self, script):
        self.script = list(script)

    def randrange(self, n):
        return self.script.pop(0)


def test_add_to_singleton_root():
    net = Network()
    child = net.add_leaf(0)
    assert child == 1
    assert net.alive_count == 2
    assert len(net.ports[0]) == 1
    assert net.ports[0][1] == child


def test_adversary_scripted_port():
    net = Network(assignment=PortAssignment.ADVERSARY, rng=FixedPorts([7, 3]))
    child = net.add_leaf(0)
    assert net.ports[0][7] == child
    assert net.port_to[child][0] == 3


def test_hundred_adds_to_root_have_distinct_ports():
    net = Network(assignment=PortAssignment.ADVERSARY, rng=random.Random(1),
                  port_cap=512)
    for _ in range(100):
        net.add_leaf(0)
    ports = list(net.ports[0])
    assert len(ports) == 100
    assert len(set(ports)) == 100


def test_remove_only_child_back_to_singleton():
    net = Network()
    c = net.add_leaf(0)
    net.remove_leaf(c)
    assert net.alive_count == 1
    assert net.ports[0] == {}


def test_remove_internal_node_rejected():
    net = Network()
    u = net.add_leaf(0)
    net.add_leaf(u)
    with pytest.raises(InvalidEvent):
        net.remove_leaf(u)


def test_remove_root_rejected():
    net = Network()
    with pytest.raises(InvalidEvent):
        net.remove_leaf(0)


def test_add_add_remove_remove_returns_to_singleton():
    net = Network()
    u = net.add_leaf(0)
    v = net.add_leaf(u)
    net.remove_leaf(v)
    net.remove_leaf(u)
    assert net.alive_count == 1
    assert net.alive_nodes() == [0]


def test_send_one_hop_counts_one():
    net = Network()
    net.add_leaf(0)
    before = net.ledger.messages_total
    net.send(0, net.port_to[0][1], payload="x")
    assert net.ledger.messages_total == before + 1


def test_relay_along_path_counts_length():
    parents = [0, 1, 2, 3]
    net = build_net(parents)
    hops = net.charge_path(4, 0, "signal")
    assert hops == 4
    assert net.ledger.messages_total == 4


def test_manual_broadcast_costs_edge_count():
    net = build_net([0, 0, 0, 1, 1])
    before = net.ledger.messages_total
    stack = [0]
    while stack:
        v = stack.pop()
        for c in net.children_by_port(v):
            net.send(v, net.port_to[v][c], payload="go")
            stack.append(c)
    assert net.ledger.messages_total - before == net.alive_count - 1


def test_send_to_dead_neighbor_raises_and_counts():
    net = Network()
    c = net.add_leaf(0)
    port = net.port_to[0][c]
    net.remove_leaf(c)
    net.ports[0][port] = c  # resurrect the stale port for the check
    with pytest.raises(DeadNeighborError):
        net.send(0, port)
    assert net.ledger.messages_to_dead == 1


def test_send_handler_receives_payload():
    net = Network()
    c = net.add_leaf(0)
    got = []
    net.set_handler(c, lambda frm_port, payload: got.append((frm_port, payload)))
    net.send(0, net.port_to[0][c], payload="hello")
    assert got == [(net.port_to[c][0], "hello")]


def test_broadcast_convergecast_singleton():
    net = Network()
    value = net.broadcast_convergecast(0, lambda p, c: True, lambda v: 1)
    assert value == 1
    assert net.ledger.messages_total == 0


def test_broadcast_convergecast_five_nodes():
    net = build_net([0, 0, 1, 1])
    members = set(net.alive_nodes())
    count = net.broadcast_convergecast(0, lambda p, c: c in members, lambda v: 1)
    assert count == 5
    assert net.ledger.messages_total == 8


def test_broadcast_convergecast_custom_aggregate():
    net = build_net([0, 0, 1])
    weight = {0: 5, 1: 2, 2: 1, 3: 9}
    total = net.broadcast_convergecast(0, lambda p, c: True, weight.__getitem__)
    assert total == 17


def test_port_uniqueness_after_random_events_both_models():
    for assignment in (PortAssignment.COMPACT, PortAssignment.ADVERSARY,
                       PortAssignment.STABLE):
        rng = random.Random(9)
        net = Network(assignment=assignment, rng=random.Random(4))
        for step in range(300):
            leaves = [v for v in net.alive_nodes()
                      if v != 0 and net.is_leaf(v)]
            if leaves and rng.random() < 0.3:
                net.remove_leaf(leaves[rng.randrange(len(leaves))])
            else:
                pool = net.alive_list
                net.add_leaf(pool[rng.randrange(len(pool))])
            assert net.check_port_uniqueness() == []
            assert net.check_tree_shape() == []


def test_replay_message_count_is_deterministic():
    def one_run():
        net = Network(assignment=PortAssignment.ADVERSARY,
                      rng=random.Random(12))
        for parent in [0, 0, 1, 2, 2, 0]:
            net.add_leaf(parent)
        net.charge_path(6, 0, "signal")
        members = set(net.alive_nodes())
        net.broadcast_convergecast(0, lambda p, c: c in members, lambda v: 1)
        return net.ledger.messages_total, dict(net.ledger.by_category)

    assert one_run() == one_run()


def test_scenario_format_round_trip():
    events = [ScenarioEvent("A", 0), ScenarioEvent("A", 1),
              ScenarioEvent("R", 2), ScenarioEvent("A", 0)]
    text = format_scenario(events)
    assert text == "A 0\nA 1\nR 2\nA 0\n"
    assert parse_scenario(text) == events


def test_scenario_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_scenario("A 0\nX 1\n")


def test_metrics_csv(tmp_path):
    net = build_net([0, 0])
    net.ledger.snapshot_event(1, 2)
    net.ledger.snapshot_event(2, 3)
    out = tmp_path / "m.csv"
    net.ledger.write_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "event,n,messages,maxLabelBits,maxMemBits"
    assert len(lines) == 3


def test_per_event_log_tree_sizes_match_alive_count():
    net = Network()
    for i, parent in enumerate([0, 1, 0], 1):
        net.add_leaf(parent)
        net.ledger.snapshot_event(i, net.alive_count)
    sizes = [row[1] for row in net.ledger.per_event_rows]
    assert sizes == [2, 3, 4]


def test_messages_total_monotone():
    net = build_net([0, 0, 1])
    seen = []
    for frm, to in [(3, 0), (2, 0), (1, 0)]:
        net.charge_path(frm, to, "signal")
        seen.append(net.ledger.messages_total)
    assert seen == sorted(seen)
