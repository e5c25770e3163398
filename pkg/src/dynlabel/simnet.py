"""Deterministic simulated message-passing network over a rooted tree.

The network owns topology (parent pointers, port maps, liveness), the
only two topological events (add-leaf, remove-leaf), and the message
ledger.  Protocol layers register listeners and are informed of events
synchronously; event notifications themselves cost no messages, only
explicit ``send`` calls are charged.

Port assignment depends on the port model and on whether the running
static scheme embeds port numbers in labels:

* ``compact``    -- node-chosen ports kept as the prefix 1..deg: a new
  child shifts every existing port up by one and takes port 1, a
  removed child's larger siblings shift down.
* ``stable``     -- node-chosen ports that never move once assigned
  (required when labels reference ports).
* ``adversary``  -- a seeded callback picks arbitrary distinct
  nonnegative ports up to a configurable cap.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from enum import Enum


class SimulationError(RuntimeError):
    pass


class InvalidEvent(SimulationError):
    """Topological event rejected by its precondition."""


class DeadNeighborError(SimulationError):
    """A message was addressed to a deleted node."""


class PortModel(str, Enum):
    DESIGNER = "designer"
    ADVERSARY = "adversary"


class PortAssignment(str, Enum):
    COMPACT = "compact"
    STABLE = "stable"
    ADVERSARY = "adversary"


DEFAULT_PORT_CAP = 1 << 20


@dataclass(frozen=True)
class ScenarioEvent:
    kind: str  # "A" (add leaf under target) or "R" (remove leaf target)
    target: int

    def __post_init__(self):
        if self.kind not in ("A", "R"):
            raise ValueError(f"bad event kind {self.kind!r}")


def parse_scenario(text: str) -> list[ScenarioEvent]:
    """Parse the newline-delimited ``A <id>`` / ``R <id>`` format."""
    events = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[0] not in ("A", "R"):
            raise ValueError(f"line {lineno}: bad scenario line {raw!r}")
        events.append(ScenarioEvent(parts[0], int(parts[1])))
    return events


def format_scenario(events) -> str:
    return "".join(f"{e.kind} {e.target}\n" for e in events)


@dataclass
class MetricsLedger:
    """Message and size accounting for one run."""

    messages_total: int = 0
    by_category: dict = field(default_factory=dict)
    messages_to_dead: int = 0
    max_label_bits: int = 0
    max_memory_bits: int = 0
    reset_count: int = 0
    marker_invocations: int = 0
    marker_max_messages: int = 0
    marker_last_messages: int = 0
    per_event_rows: list = field(default_factory=list)
    restart_log: list = field(default_factory=list)
    phase_log: list = field(default_factory=list)

    def count(self, category: str, n: int = 1) -> None:
        self.messages_total += n
        self.by_category[category] = self.by_category.get(category, 0) + n

    def category(self, name: str) -> int:
        return self.by_category.get(name, 0)

    def protocol_messages(self) -> int:
        """Messages belonging to the labeling scheme proper."""
        return sum(
            self.by_category.get(c, 0)
            for c in ("signal", "reset_count", "marker", "broadcast")
        )

    def note_label_bits(self, n: int) -> None:
        if n > self.max_label_bits:
            self.max_label_bits = n

    def note_memory_bits(self, n: int) -> None:
        if n > self.max_memory_bits:
            self.max_memory_bits = n

    def note_marker(self, messages: int) -> None:
        self.marker_invocations += 1
        self.marker_last_messages = messages
        if messages > self.marker_max_messages:
            self.marker_max_messages = messages

    def snapshot_event(self, event_index: int, alive_n: int) -> None:
        self.per_event_rows.append(
            (event_index, alive_n, self.messages_total,
             self.max_label_bits, self.max_memory_bits)
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["event", "n", "messages", "maxLabelBits", "maxMemBits"])
            out.writerows(self.per_event_rows)


class Network:
    """Rooted dynamic tree with ports, liveness and charged messaging."""

    def __init__(self, *, assignment=PortAssignment.COMPACT, rng=None,
                 port_cap=DEFAULT_PORT_CAP):
        self.assignment = PortAssignment(assignment)
        self.rng = rng if rng is not None else random.Random(0)
        self.port_cap = port_cap
        self.root = 0
        self.next_id = 1
        self.parent = {0: None}
        self.children = {0: []}          # alive children, creation order
        self.depth = {0: 0}
        self.alive = {0: True}
        self.alive_count = 1
        self.alive_list = [0]            # alive nodes, stable swap-remove order
        self._alive_pos = {0: 0}
        self.ports = {0: {}}             # node -> {port: neighbor}
        self.port_to = {0: {}}           # node -> {neighbor: port}
        self.ledger = MetricsLedger()
        self.handlers = {}               # node -> callable(frm_port, payload)
        self._add_listeners = []
        self._remove_listeners = []

    # -- registration -------------------------------------------------

    def on_add(self, cb) -> None:
        self._add_listeners.append(cb)

    def on_remove(self, cb) -> None:
        self._remove_listeners.append(cb)

    def set_handler(self, node, cb) -> None:
        self.handlers[node] = cb

    # -- queries ------------------------------------------------------

    def is_alive(self, v) -> bool:
        return self.alive.get(v, False)

    def is_leaf(self, v) -> bool:
        return not self.children[v]

    def alive_nodes(self) -> list:
        return list(self.alive_list)

    def children_by_port(self, v) -> list:
        """v's alive children ordered by current port number."""
        pt = self.port_to[v]
        return sorted(self.children[v], key=pt.__getitem__)

    def degree(self, v) -> int:
        return len(self.ports[v])

    # -- topological events ---------------------------------------------

    def add_leaf(self, parent: int) -> int:
        """Attach a fresh leaf under an alive parent; returns its id."""
        if not self.is_alive(parent):
            raise InvalidEvent(f"add-leaf: parent {parent} not alive")
        child = self.next_id
        self.next_id += 1
        self._assign_ports(parent, child)
        self.parent[child] = parent
        self.children[parent].append(child)
        self.children[child] = []
        self.depth[child] = self.depth[parent] + 1
        self.alive[child] = True
        self.alive_count += 1
        self._alive_pos[child] = len(self.alive_list)
        self.alive_list.append(child)
        for cb in self._add_listeners:
            cb(parent, child)
        return child

    def remove_leaf(self, leaf: int) -> None:
        """Delete an alive non-root leaf; listeners run before teardown."""
        if not self.is_alive(leaf):
            raise InvalidEvent(f"remove-leaf: {leaf} not alive")
        if leaf == self.root:
            raise InvalidEvent("remove-leaf: root is never deleted")
        if self.children[leaf]:
            raise InvalidEvent(f"remove-leaf: {leaf} has children")
        for cb in self._remove_listeners:
            cb(leaf)
        parent = self.parent[leaf]
        q = self.port_to[parent].pop(leaf)
        del self.ports[parent][q]
        self.children[parent].remove(leaf)
        if self.assignment is PortAssignment.COMPACT:
            self._compact_after_remove(parent, q)
        self.ports[leaf] = {}
        self.port_to[leaf] = {}
        self.alive[leaf] = False
        self.alive_count -= 1
        i = self._alive_pos.pop(leaf)
        last = self.alive_list.pop()
        if last != leaf:
            self.alive_list[i] = last
            self._alive_pos[last] = i
        self.handlers.pop(leaf, None)

    def _assign_ports(self, parent, child):
        if self.assignment is PortAssignment.COMPACT:
            self.ports[parent] = {p + 1: w for p, w in self.ports[parent].items()}
            self.port_to[parent] = {w: p + 1 for w, p in self.port_to[parent].items()}
            self.ports[parent][1] = child
            self.port_to[parent][child] = 1
            self.ports[child] = {1: parent}
            self.port_to[child] = {parent: 1}
        elif self.assignment is PortAssignment.STABLE:
            q = max(self.ports[parent], default=0) + 1
            self.ports[parent][q] = child
            self.port_to[parent][child] = q
            self.ports[child] = {0: parent}
            self.port_to[child] = {parent: 0}
        else:
            q = self._adversary_port(parent)
            self.ports[parent][q] = child
            self.port_to[parent][child] = q
            r = self._adversary_port(child, fresh=True)
            self.ports[child] = {r: parent}
            self.port_to[child] = {parent: r}

    def _adversary_port(self, node, fresh=False):
        used = () if fresh else self.ports[node]
        while True:
            q = self.rng.randrange(self.port_cap + 1)
            if q not in used:
                return q

    def _compact_after_remove(self, parent, q):
        moved = [(p, w) for p, w in self.ports[parent].items()
                 if p > q and w != self.parent[parent]]
        for p, w in sorted(moved):
            del self.ports[parent][p]
            self.ports[parent][p - 1] = w
            self.port_to[parent][w] = p - 1

    def renumber_ports(self, v, mapping) -> None:
        """Install a full designer port map {port: neighbor} at v."""
        if len(set(mapping)) != len(mapping):
            raise SimulationError("duplicate port numbers in renumbering")
        if set(mapping.values()) != set(self.ports[v].values()):
            raise SimulationError("renumbering must cover exactly current neighbors")
        self.ports[v] = dict(mapping)
        self.port_to[v] = {w: p for p, w in mapping.items()}

    # -- messaging ------------------------------------------------------

    def send(self, frm: int, via_port: int, payload=None, category="protocol"):
        """One charged hop to the neighbor behind via_port."""
        try:
            to = self.ports[frm][via_port]
        except KeyError:
            raise SimulationError(f"node {frm} has no port {via_port}") from None
        if not self.alive[to]:
            self.ledger.messages_to_dead += 1
            raise DeadNeighborError(f"message from {frm} to deleted node {to}")
        self.ledger.count(category)
        handler = self.handlers.get(to)
        if handler is not None:
            handler(self.port_to[to][frm], payload)
        return to

    def charge_path(self, frm: int, ancestor: int, category: str) -> int:
        """Relay a signal from frm up to an ancestor, one hop per edge."""
        hops = 0
        x = frm
        while x != ancestor:
            p = self.parent[x]
            if p is None:
                raise SimulationError(f"{ancestor} is not an ancestor of {frm}")
            self.send(x, self.port_to[x][p], category=category)
            x = p
            hops += 1
        return hops

    def broadcast_convergecast(self, subtree_root: int, edge_filter,
                               aggregate, combine=None, category="reset_count"):
        """Broadcast down and converge back up over a filtered subtree.

        ``edge_filter(parent, child)`` selects the subtree edges;
        ``aggregate(node)`` yields each member's contribution and
        ``combine`` folds them (defaults to addition).  Charges exactly
        2*(m-1) messages for a subtree of m members.
        """
        if not self.is_alive(subtree_root):
            raise SimulationError(f"subtree root {subtree_root} not alive")
        if combine is None:
            combine = lambda a, b: a + b
        total = aggregate(subtree_root)
        stack = [subtree_root]
        while stack:
            v = stack.pop()
            for c in self.children_by_port(v):
                if not edge_filter(v, c):
                    continue
                self.send(v, self.port_to[v][c], category=category)      # down
                self.send(c, self.port_to[c][v], category=category)      # up
                total = combine(total, aggregate(c))
                stack.append(c)
        return total

    # -- oracles over the live tree --------------------------------------

    def nca(self, u, v):
        from .functions import nca
        return nca(self, u, v)

    def distance(self, u, v):
        a = self.nca(u, v)
        return self.depth[u] + self.depth[v] - 2 * self.depth[a]

    def check_port_uniqueness(self) -> list[str]:
        bad = []
        for v in self.alive_nodes():
            ps = list(self.ports[v])
            if len(ps) != len(set(ps)):
                bad.append(f"node {v}: duplicate ports {ps}")
        return bad

    def check_tree_shape(self) -> list[str]:
        """Alive nodes must form one tree rooted at the root."""
        bad = []
        seen = set()
        stack = [self.root]
        while stack:
            v = stack.pop()
            seen.add(v)
            stack.extend(self.children[v])
        for v in self.alive_nodes():
            if v not in seen:
                bad.append(f"node {v} unreachable from root")
        if len(seen) != self.alive_count:
            bad.append("alive count does not match reachable set")
        return bad
