"""Run orchestration: scenario generation and replay, per-event oracle
verification, invariant scanning, bound checks, metrics emission.

A run is fully described by a ``RunConfig``; identical configs produce
byte-identical metrics CSVs.  The report's exit contract: a run passes
iff there are zero decoder mismatches, zero invariant violations and
zero bound violations.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass, field

from . import budgets
from .dynamic import (DynamicScheme, IncreasingScheme, QuotaFunction)
from .functions import get_function
from .simnet import (DEFAULT_PORT_CAP, InvalidEvent, Network, PortAssignment,
                     ScenarioEvent, parse_scenario)
from .static_schemes import scheme_for

EXHAUSTIVE_HARD_CAP = 128
AUTO_EXHAUSTIVE_LIMIT = 64


@dataclass
class RunConfig:
    seed: int = 0
    events: int = 100
    p_delete: float = 0.0
    model: str = "increasing"          # increasing | dynamic
    port_model: str = "designer"       # designer | adversary
    function: str = "distance"
    quota_fn: str = "pow:0.5"
    tracker: str = "exact"
    verify: str = "sampled:64"         # exhaustive | sampled:<m> | off
    invariants: str = "final"          # every-event | final | off
    bounds: bool = True
    port_cap: int = DEFAULT_PORT_CAP
    scenario_path: str | None = None
    out_path: str | None = None
    mem_out_path: str | None = None

    def __post_init__(self):
        if self.model not in ("increasing", "dynamic"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.port_model not in ("designer", "adversary"):
            raise ValueError(f"unknown port model {self.port_model!r}")
        if self.model == "increasing" and self.p_delete != 0:
            raise ValueError("the leaf-increasing model forbids deletions")
        if not 0 <= self.p_delete < 1:
            raise ValueError("deletion probability must lie in [0, 1)")
        if self.invariants not in ("every-event", "final", "off"):
            raise ValueError(f"unknown invariant mode {self.invariants!r}")
        self._parse_verify()

    def _parse_verify(self):
        if self.verify in ("exhaustive", "off"):
            return self.verify, 0
        kind, _, m = self.verify.partition(":")
        if kind != "sampled" or not m.isdigit():
            raise ValueError(f"unknown verify mode {self.verify!r}")
        return "sampled", int(m)


@dataclass
class Mismatch:
    seed: int
    event_index: int
    u: int
    v: int
    got: str
    want: str


@dataclass
class VerificationReport:
    config: dict
    queries_checked: int = 0
    mismatches: list = field(default_factory=list)
    invariant_violations: list = field(default_factory=list)
    bound_violations: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    events_applied: int = 0
    final_n: int = 0
    messages_total: int = 0
    messages_by_category: dict = field(default_factory=dict)
    messages_to_dead: int = 0
    protocol_messages: int = 0
    max_label_bits: int = 0
    max_memory_bits: int = 0
    reset_count: int = 0
    marker_max_messages: int = 0
    restarts: list = field(default_factory=list)
    phases: list = field(default_factory=list)

    def passed(self) -> bool:
        return not (self.mismatches or self.invariant_violations
                    or self.bound_violations or self.errors)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["passed"] = self.passed()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=str)


def generate_scenario(seed: int, n_events: int, p_delete: float):
    """Uniformly random valid events: adds pick a uniform alive parent,
    removals a uniform alive non-root leaf (an add is emitted instead
    when no leaf is removable)."""
    rng = random.Random(seed)
    alive = [0]
    parent = {}
    child_count = {0: 0}
    removable = []
    removable_pos = {}

    def _remove_from_removable(v):
        i = removable_pos.pop(v)
        last = removable.pop()
        if last != v:
            removable[i] = last
            removable_pos[last] = i

    def _add_to_removable(v):
        removable_pos[v] = len(removable)
        removable.append(v)

    events = []
    next_id = 1
    for _ in range(n_events):
        if p_delete > 0 and removable and rng.random() < p_delete:
            leaf = removable[rng.randrange(len(removable))]
            events.append(ScenarioEvent("R", leaf))
            _remove_from_removable(leaf)
            alive.remove(leaf)
            p = parent[leaf]
            child_count[p] -= 1
            if child_count[p] == 0 and p != 0:
                _add_to_removable(p)
        else:
            p = alive[rng.randrange(len(alive))]
            node = next_id
            next_id += 1
            events.append(ScenarioEvent("A", p))
            alive.append(node)
            parent[node] = p
            child_count[node] = 0
            if child_count[p] == 0 and p != 0:
                _remove_from_removable(p)
            child_count[p] += 1
            _add_to_removable(node)
    return events


def build_network(config: RunConfig) -> Network:
    if config.function == "routing":
        assignment = (PortAssignment.STABLE
                      if config.port_model == "designer"
                      else PortAssignment.ADVERSARY)
    else:
        assignment = (PortAssignment.COMPACT
                      if config.port_model == "designer"
                      else PortAssignment.ADVERSARY)
    rng = random.Random(config.seed * 31 + 7)
    return Network(assignment=assignment, rng=rng, port_cap=config.port_cap)


def build_runner(config: RunConfig, net: Network):
    qf = QuotaFunction.parse(config.quota_fn)
    verify_scopes = config.invariants != "off"
    if config.model == "increasing":
        return IncreasingScheme(net, config.function, qf,
                                port_model=config.port_model,
                                verify_scopes=verify_scopes)
    return DynamicScheme(net, config.function, qf,
                         port_model=config.port_model,
                         tracker=config.tracker,
                         verify_scopes=verify_scopes)


def verify_step(runner, fn, mode, sample_size, rng, event_index, seed,
                report: VerificationReport) -> None:
    """Check decoded values against the oracle for one event's tree."""
    net = runner.net
    n = net.alive_count
    exhaustive = (mode == "exhaustive"
                  or (mode == "sampled" and n <= AUTO_EXHAUSTIVE_LIMIT))
    if mode == "exhaustive" and n > EXHAUSTIVE_HARD_CAP:
        raise ValueError("exhaustive verification is capped at 128 nodes")
    checked = 0
    if exhaustive:
        nodes = sorted(net.alive_nodes())
        labels = {v: runner.label(v) for v in nodes}
        from .scheme_core import decode_labels
        pi = runner.core.pi
        ordered = not fn.symmetric
        for i, u in enumerate(nodes):
            start = 0 if ordered else i
            for v in nodes[start:]:
                got = decode_labels(fn, pi, labels[u], labels[v])
                want = fn.oracle(net, u, v)
                checked += 1
                if got != want:
                    report.mismatches.append(Mismatch(
                        seed, event_index, u, v, repr(got), repr(want)))
    else:
        pool = net.alive_list
        for _ in range(sample_size):
            u = pool[rng.randrange(len(pool))]
            v = pool[rng.randrange(len(pool))]
            got = runner.query(u, v)
            want = fn.oracle(net, u, v)
            checked += 1
            if got != want:
                report.mismatches.append(Mismatch(
                    seed, event_index, u, v, repr(got), repr(want)))
    report.queries_checked += checked


class _BoundTracker:
    """Per-epoch message and size budget checks against declared curves."""

    def __init__(self, config, net, runner):
        self.config = config
        self.net = net
        self.runner = runner
        self.pi = scheme_for(config.function)
        self.epoch_base_messages = 0
        self.epoch_base_joins = 0
        self.epoch_n0 = net.alive_count
        self.restarts_seen = 0
        self.max_levels = runner.levels

    def _epoch_ever(self) -> int:
        return self.epoch_n0 + (self.runner.core.joins - self.epoch_base_joins)

    def after_event(self, event_index, report) -> None:
        ledger = self.net.ledger
        restarts = getattr(self.runner, "restart_log", [])
        if len(restarts) > self.restarts_seen:
            self.restarts_seen = len(restarts)
            self.epoch_base_messages = ledger.protocol_messages()
            self.epoch_base_joins = self.runner.core.joins
            self.epoch_n0 = restarts[-1][1]
            return
        self.max_levels = max(self.max_levels, self.runner.levels)
        ever = self._epoch_ever()
        spent = ledger.protocol_messages() - self.epoch_base_messages
        allowed = budgets.finite_run_message_budget(
            self.runner.quota, self.runner.levels,
            budgets.marker_message_budget(ever))
        if spent > allowed:
            report.bound_violations.append(
                f"event {event_index}: protocol messages {spent} exceed "
                f"budget {allowed} (quota {self.runner.quota}, levels "
                f"{self.runner.levels}, count {ever})")
        label_budget = budgets.dynamic_label_budget(
            self.pi.ls_budget(ever), self.runner.levels)
        if ledger.max_label_bits > label_budget:
            report.bound_violations.append(
                f"event {event_index}: label bits {ledger.max_label_bits} "
                f"exceed budget {label_budget}")

    def final(self, report) -> None:
        ledger = self.net.ledger
        ever = self._epoch_ever()
        if self.runner.core.bookkeeping.kind == "designer":
            mem_budget = budgets.designer_memory_budget(ever, self.max_levels)
        else:
            mem_budget = budgets.adversary_memory_budget(
                ever, self.max_levels, self.config.port_cap)
        if ledger.max_memory_bits > mem_budget:
            report.bound_violations.append(
                f"memory bits {ledger.max_memory_bits} exceed budget "
                f"{mem_budget}")


def run(config: RunConfig) -> VerificationReport:
    """Replay a scenario through the configured scheme and verify it."""
    if config.scenario_path:
        with open(config.scenario_path) as fh:
            events = parse_scenario(fh.read())
    else:
        events = generate_scenario(config.seed, config.events, config.p_delete)
    net = build_network(config)
    runner = build_runner(config, net)
    fn = get_function(config.function)
    mode, sample_size = config._parse_verify()
    rng_verify = random.Random(config.seed * 1_000_003 + 77)
    report = VerificationReport(config=dataclasses.asdict(config))
    bound_tracker = _BoundTracker(config, net, runner) if config.bounds else None
    for i, ev in enumerate(events, 1):
        try:
            runner.apply(ev)
        except InvalidEvent as exc:
            report.errors.append(f"event {i}: {exc}")
            break
        report.events_applied = i
        net.ledger.snapshot_event(i, net.alive_count)
        if mode != "off":
            verify_step(runner, fn, mode, sample_size, rng_verify, i,
                        config.seed, report)
        if config.invariants == "every-event":
            for msg in runner.scan_invariants():
                report.invariant_violations.append(f"event {i}: {msg}")
        if bound_tracker is not None:
            bound_tracker.after_event(i, report)
    if config.invariants == "final":
        report.invariant_violations.extend(runner.scan_invariants())
    if bound_tracker is not None:
        bound_tracker.final(report)
    ledger = net.ledger
    report.final_n = net.alive_count
    report.messages_total = ledger.messages_total
    report.messages_by_category = dict(ledger.by_category)
    report.messages_to_dead = ledger.messages_to_dead
    report.protocol_messages = ledger.protocol_messages()
    report.max_label_bits = ledger.max_label_bits
    report.max_memory_bits = ledger.max_memory_bits
    report.reset_count = ledger.reset_count
    report.marker_max_messages = ledger.marker_max_messages
    report.restarts = list(getattr(runner, "restart_log", []))
    report.phases = [(i, p.tree_count, p.quota, p.levels)
                     for i, p in getattr(runner, "phase_log", [])]
    if config.out_path:
        ledger.write_csv(config.out_path)
    if config.mem_out_path:
        write_memory_report(config.mem_out_path, runner)
    return report


def write_memory_report(path, runner) -> None:
    import csv
    core = runner.core
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["node", "model", "bits", "level_count"])
        for v in sorted(core.net.alive_nodes()):
            out.writerow([v, core.bookkeeping.kind, core.memory_bits(v),
                          core.levels])
