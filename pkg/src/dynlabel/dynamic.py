"""Scheme drivers for the two dynamic tree models.

* ``FiniteScheme``     -- one fixed-parameter nested-reset scheme run on a
  growing tree; finishes after the top level's reset quota fills.
* ``IncreasingScheme`` -- chains finite schemes on a leaf-increasing tree:
  whenever one finishes, the node count taken in its final whole-tree
  reset picks the next quota and height (quota from a user-supplied
  growth rule, height from how many quota-powers fit below twice the
  count).
* ``DynamicScheme``    -- the leaf-dynamic variant: deletions are handled
  by ever-count shares and backup copies, resets count nodes that were
  ever in a subtree, and a change tracker restarts the whole scheme on
  the current tree once additions or deletions since the last restart
  exceed a ninth of its baseline size.
"""

from __future__ import annotations

from dataclasses import dataclass

from .scheme_core import SchemeCore
from .simnet import InvalidEvent, ScenarioEvent


@dataclass(frozen=True)
class PhaseParams:
    tree_count: int
    quota: int
    levels: int


class QuotaFunction:
    """Growth rule n -> quota, clamped to at least 2.

    Kinds: ``pow:e`` is n**e, ``logpow:e`` is (log2 n)**e, ``const:k``
    is the constant k.
    """

    def __init__(self, kind: str, param: float):
        if kind not in ("pow", "logpow", "const"):
            raise ValueError(f"unknown quota function kind {kind!r}")
        self.kind = kind
        self.param = param

    @classmethod
    def parse(cls, text: str) -> "QuotaFunction":
        kind, _, param = text.partition(":")
        if not param:
            raise ValueError(f"quota function needs a parameter: {text!r}")
        return cls(kind, float(param))

    def __str__(self):
        param = int(self.param) if self.kind == "const" else self.param
        return f"{self.kind}:{param}"

    def value(self, n: int) -> int:
        if n < 1:
            raise ValueError("tree count must be positive")
        if self.kind == "pow":
            raw = int(n ** self.param)
        elif self.kind == "logpow":
            raw = int(max(n, 2).bit_length() ** self.param)
        else:
            raw = int(self.param)
        return max(2, raw)


def compute_phase_params(n: int, qf: QuotaFunction) -> PhaseParams:
    """Quota and height for a phase starting at n counted nodes.

    The height is two more than the largest exponent e with
    quota**e <= 2n, found by integer multiplication so the boundary
    cases are exact.
    """
    if n < 1:
        raise ValueError("tree count must be positive")
    quota = qf.value(n)
    e = 0
    power = 1
    while power * quota <= 2 * n:
        power *= quota
        e += 1
    return PhaseParams(n, quota, e + 2)


class ExactChangeTracker:
    """Counts every addition and deletion at the root, exactly."""

    name = "exact"

    def __init__(self):
        self.baseline = 0
        self.adds = 0
        self.dels = 0

    def restart_baseline(self, n0: int) -> None:
        self.baseline = n0
        self.adds = 0
        self.dels = 0

    def on_change(self, kind: str) -> bool:
        if kind == "A":
            self.adds += 1
        else:
            self.dels += 1
        return self.crossed()

    def crossed(self) -> bool:
        return 9 * self.adds > self.baseline or 9 * self.dels > self.baseline

    def changes(self) -> int:
        return self.adds + self.dels


TRACKERS = {"exact": ExactChangeTracker}


def make_tracker(name: str):
    try:
        return TRACKERS[name]()
    except KeyError:
        raise ValueError(f"unknown change tracker {name!r}") from None


def _bookkeeping_kind(function: str, port_model: str) -> str:
    # a routing scheme embeds port numbers in its labels, so its ports can
    # never be renumbered and scope identification must use child tables
    if function == "routing":
        return "adversary"
    return "adversary" if port_model == "adversary" else "designer"


class FiniteScheme:
    """Standalone fixed-parameter scheme on a growing tree."""

    def __init__(self, net, function: str, *, quota: int, levels: int,
                 bookkeeping: str = "designer", verify_scopes: bool = False):
        self.net = net
        self.core = SchemeCore(net, function, quota=quota, levels=levels,
                               bookkeeping=bookkeeping,
                               verify_scopes=verify_scopes)
        self.core.install_fresh()
        self.core.on_finished = self._finish
        self.joins_at_finish = None

    def _finish(self, count):
        self.joins_at_finish = self.core.joins

    @property
    def finished(self) -> bool:
        return self.core.finished

    @property
    def joins(self) -> int:
        return self.core.joins

    def add_leaf(self, parent: int) -> int:
        return self.core.apply_add(parent)

    def label(self, w):
        return self.core.label(w)

    def query(self, u, v):
        return self.core.query(u, v)

    def scan_invariants(self):
        return self.core.scan_invariants()


class IncreasingScheme:
    """Leaf-increasing driver: finite phases chained by counted resets."""

    def __init__(self, net, function: str, quota_fn: QuotaFunction, *,
                 port_model: str = "designer", verify_scopes: bool = False):
        self.net = net
        self.quota_fn = quota_fn
        self.event_index = 0
        self.phase_log = []
        bookkeeping = _bookkeeping_kind(function, port_model)
        if net.alive_count == 1:
            quota, levels = quota_fn.value(1), 1
            self.core = SchemeCore(net, function, quota=quota, levels=levels,
                                   bookkeeping=bookkeeping,
                                   verify_scopes=verify_scopes)
            self.core.install_fresh()
        else:
            params = compute_phase_params(net.alive_count, quota_fn)
            self.core = SchemeCore(net, function, quota=params.quota,
                                   levels=params.levels,
                                   bookkeeping=bookkeeping,
                                   verify_scopes=verify_scopes)
            self.core.install_on_tree()
        self.core.on_finished = self._phase_shift

    def _phase_shift(self, count):
        params = compute_phase_params(count, self.quota_fn)
        self.core.transition(params.quota, params.levels)
        self.phase_log.append((self.event_index, params))
        self.net.ledger.phase_log.append(
            (self.event_index, count, params.quota, params.levels))

    @property
    def quota(self):
        return self.core.quota

    @property
    def levels(self):
        return self.core.levels

    def add_leaf(self, parent: int) -> int:
        self.event_index += 1
        return self.core.apply_add(parent)

    def remove_leaf(self, leaf: int) -> None:
        raise InvalidEvent("the leaf-increasing model has no deletions")

    def apply(self, event: ScenarioEvent) -> None:
        if event.kind == "A":
            self.add_leaf(event.target)
        else:
            self.remove_leaf(event.target)

    def label(self, w):
        return self.core.label(w)

    def query(self, u, v):
        return self.core.query(u, v)

    def scan_invariants(self):
        return self.core.scan_invariants()


class DynamicScheme:
    """Leaf-dynamic driver: ever-counted resets, backups, tracked restarts."""

    def __init__(self, net, function: str, quota_fn: QuotaFunction, *,
                 port_model: str = "designer", tracker: str = "exact",
                 verify_scopes: bool = False):
        self.net = net
        self.quota_fn = quota_fn
        self.event_index = 0
        self.phase_log = []
        self.restart_log = []
        bookkeeping = _bookkeeping_kind(function, port_model)
        if net.alive_count == 1:
            quota, levels = quota_fn.value(1), 1
            self.core = SchemeCore(net, function, quota=quota, levels=levels,
                                   bookkeeping=bookkeeping, dynamic_mode=True,
                                   count_ever=True, verify_scopes=verify_scopes)
            self.core.install_fresh()
            n0 = 1
        else:
            n0 = self._measure_tree()
            params = compute_phase_params(n0, quota_fn)
            self.core = SchemeCore(net, function, quota=params.quota,
                                   levels=params.levels,
                                   bookkeeping=bookkeeping, dynamic_mode=True,
                                   count_ever=True, verify_scopes=verify_scopes)
            self.core.install_on_tree()
        self.core.on_finished = self._phase_shift
        self.tracker = make_tracker(tracker)
        self.tracker.restart_baseline(n0)

    def _measure_tree(self) -> int:
        alive = set(self.net.alive_nodes())
        return self.net.broadcast_convergecast(
            self.net.root, lambda p, c: c in alive, lambda v: 1,
            category="watch")

    def _phase_shift(self, count):
        params = compute_phase_params(count, self.quota_fn)
        self.core.transition(params.quota, params.levels)
        self.phase_log.append((self.event_index, params))
        self.net.ledger.phase_log.append(
            (self.event_index, count, params.quota, params.levels))

    @property
    def quota(self):
        return self.core.quota

    @property
    def levels(self):
        return self.core.levels

    def add_leaf(self, parent: int) -> int:
        self.event_index += 1
        child = self.core.apply_add(parent)
        self.net.charge_path(child, self.net.root, "watch")
        if self.tracker.on_change("A"):
            self._restart()
        return child

    def remove_leaf(self, leaf: int) -> None:
        self.event_index += 1
        parent = self.net.parent[leaf]
        self.core.apply_remove(leaf)
        self.net.charge_path(parent, self.net.root, "watch")
        if self.tracker.on_change("R"):
            self._restart()

    def apply(self, event: ScenarioEvent) -> None:
        if event.kind == "A":
            self.add_leaf(event.target)
        else:
            self.remove_leaf(event.target)

    def _restart(self) -> None:
        n0 = self._measure_tree()
        params = compute_phase_params(n0, self.quota_fn)
        self.core.quota = params.quota
        self.core.levels = params.levels
        self.core.install_on_tree()
        self.tracker.restart_baseline(n0)
        self.restart_log.append((self.event_index, n0))
        self.net.ledger.restart_log.append((self.event_index, n0))

    def label(self, w):
        return self.core.label(w)

    def query(self, u, v):
        return self.core.query(u, v)

    def scan_invariants(self):
        return self.core.scan_invariants()
