"""Core machinery of the finite nested-reset labeling scheme.

The scheme maintains, per node and per level l up to the current height,
a nested-subtree decomposition: every node belongs to exactly one
level-l subtree, whose root is its nearest ancestor-or-self flagged as a
level-l scope root.  Every join triggers a relabeling reset of the
joining node's level-1 subtree; when a level's reset tally reaches the
quota, the enclosing level is reset and every member becomes the root
of fresh lower-level scopes.  After the top level's quota fills, the
scheme finishes (standalone use) or hands control to a phase controller.

A node's queryable label nests one layer per level whose enclosing
scope has been reset at least once:

    <static label of the lower-level scope root,
     F(that root, node),
     label one level down>

bottoming out at the node's own static label from its latest level-1
reset.  The decoder recurses while the outer static parts match and
otherwise combines the two stored values with the static decoder's
answer for the two scope roots.
"""

from __future__ import annotations

from . import bits
from .functions import get_function
from .memory import (AdversaryBookkeeping, BackupStore, DesignerBookkeeping,
                     int_bits)
from .simnet import InvalidEvent
from .static_schemes import DecodeError, scheme_for


class SchemeError(RuntimeError):
    pass


class NodeState:
    """Per-node scheme memory; lists are indexed by level, slot 0 unused."""

    __slots__ = ("top_scope", "tally", "ever_share", "ever_count",
                 "statics", "links", "watermark", "scoped_count",
                 "slot_table", "slot_backref")

    def __init__(self, levels: int):
        self.top_scope = 0
        self.tally = [0] * (levels + 1)
        self.ever_share = [0] * (levels + 1)
        self.ever_count = [0] * (levels + 1)
        self.statics = [None] * (levels + 1)
        self.links = [None] * (levels + 1)
        self.watermark = [0] * (levels + 1)
        self.scoped_count = [0] * (levels + 1)
        self.slot_table = [None] * (levels + 1)
        self.slot_backref = [None] * (levels + 1)


class SchemeCore:
    """One running scheme instance over a live network."""

    def __init__(self, net, function: str, *, quota: int, levels: int,
                 bookkeeping: str = "designer", dynamic_mode: bool = False,
                 count_ever: bool = False, verify_scopes: bool = False):
        if quota < 2:
            raise SchemeError("reset quota must exceed 1")
        if levels < 1:
            raise SchemeError("need at least one level")
        self.net = net
        self.fn = get_function(function)
        self.pi = scheme_for(function)
        if function == "routing" and net.assignment.value == "compact":
            raise SchemeError("routing labels pin port numbers; the network "
                              "must use stable or adversary ports")
        self.quota = quota
        self.levels = levels
        self.dynamic_mode = dynamic_mode
        self.count_ever = count_ever
        self.verify_scopes = verify_scopes
        self.states: dict[int, NodeState] = {}
        if bookkeeping == "designer":
            self.bookkeeping = DesignerBookkeeping(self)
        elif bookkeeping == "adversary":
            self.bookkeeping = AdversaryBookkeeping(self, with_backrefs=dynamic_mode)
        else:
            raise SchemeError(f"unknown bookkeeping {bookkeeping!r}")
        self.backups = BackupStore(self) if dynamic_mode else None
        self.finished = False
        self.joins = 0
        self.on_finished = None          # callback(last reset count)
        self.last_reset_labels = None
        self.last_reset_members = None
        self.last_reset_count = None
        self.epoch = 0
        self.violations: list[str] = []
        self._dirty_mem: set[int] = set()
        self._dirty_labels: set[int] = set()
        net.on_add(self._joined)
        net.on_remove(self._leaving)

    # -- installation ---------------------------------------------------

    def install_fresh(self) -> None:
        """Start on a single-node tree; labels installed without a
        counted reset so the root is queryable from the start."""
        if self.net.alive_count != 1:
            raise SchemeError("fresh install requires a singleton tree")
        root = self.net.root
        st = NodeState(self.levels)
        st.top_scope = self.levels
        for l in range(1, self.levels + 1):
            st.ever_share[l] = 1
            st.ever_count[l] = 1
        for l in range(2, self.levels + 1):
            st.links[l] = self.fn.self_value(self.net, root)
        self.states[root] = st
        labels = self.pi.marker(self.net, root, {root})
        for l in range(1, self.levels + 1):
            st.statics[l] = labels[root]
        self.last_reset_labels = labels
        self.last_reset_members = [root]
        self.last_reset_count = 1
        self._dirty_labels.add(root)
        self._dirty_mem.add(root)
        self._flush_event()

    def install_on_tree(self) -> int:
        """Start (or restart) on the current multi-node tree: one counted
        whole-tree reset, then every node roots fresh lower scopes."""
        net = self.net
        root = net.root
        members = self._whole_tree_order()
        for v in members:
            st = NodeState(self.levels)
            st.top_scope = self.levels if v == root else self.levels - 1
            for l in range(1, self.levels + 1):
                st.ever_share[l] = 1
                st.ever_count[l] = 1
            for l in range(2, self.levels + 1):
                st.links[l] = self.fn.self_value(net, v)
            self.states[v] = st
        count = self._count_scope(root, set(members), self.levels)
        rst = self.states[root]
        rst.tally[self.levels] = 1
        rst.ever_count[self.levels] = count
        labels = self.pi.marker(net, root, set(members))
        for v in members:
            st = self.states[v]
            for l in range(1, self.levels + 1):
                st.statics[l] = labels[v]
        self.bookkeeping.on_whole_tree_reset(members)
        if len(members) > 1:
            net.ledger.count("broadcast", len(members) - 1)
        net.ledger.reset_count += 1
        self.epoch += 1
        self.last_reset_labels = labels
        self.last_reset_members = members
        self.last_reset_count = count
        self.finished = False
        self._dirty_labels.update(members)
        self._dirty_mem.update(members)
        self._flush_event()
        return count

    def transition(self, quota: int, levels: int) -> None:
        """Swap phase parameters in place, reusing the labels of the
        whole-tree reset that just completed."""
        if quota < 2:
            raise SchemeError("reset quota must exceed 1")
        labels = self.last_reset_labels
        members = self.last_reset_members
        net = self.net
        root = net.root
        old_levels = self.levels
        carry = {v: self.states[v].ever_share[old_levels] for v in members}
        carry_total = self.states[root].ever_count[old_levels]
        self.quota, self.levels = quota, levels
        for v in members:
            st = NodeState(levels)
            st.top_scope = levels if v == root else levels - 1
            for l in range(1, levels + 1):
                st.ever_share[l] = 1
                st.ever_count[l] = 1
            st.ever_share[levels] = carry[v]
            for l in range(2, levels + 1):
                st.links[l] = self.fn.self_value(net, v)
            for l in range(1, levels + 1):
                st.statics[l] = labels[v]
            self.states[v] = st
        rst = self.states[root]
        rst.tally[levels] = 1
        rst.ever_count[levels] = carry_total
        if len(members) > 1:
            net.ledger.count("broadcast", len(members) - 1)
        self.finished = False
        self._dirty_labels.update(members)
        self._dirty_mem.update(members)

    def _whole_tree_order(self):
        order = []
        stack = [self.net.root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(self.net.children[v])
        return order

    # -- event entry points ----------------------------------------------

    def apply_add(self, parent: int) -> int:
        if self.finished:
            raise SchemeError("scheme already finished")
        child = self.net.add_leaf(parent)
        self._flush_event()
        return child

    def apply_remove(self, leaf: int) -> None:
        if self.finished:
            raise SchemeError("scheme already finished")
        self.net.remove_leaf(leaf)
        self._flush_event()

    # -- network listeners -------------------------------------------------

    def _joined(self, parent: int, child: int) -> None:
        net = self.net
        st = NodeState(self.levels)
        self.states[child] = st
        pst = self.states[parent]
        for l in range(1, self.levels + 1):
            st.ever_share[l] = 1
        edge = self.fn.edge_value(net, parent, child)
        for l in range(2, self.levels + 1):
            st.links[l] = self.fn.compose(pst.links[l], edge)
        anchors = self._anchors(parent)
        for l in range(1, self.levels + 1):
            self.states[anchors[l]].ever_count[l] += 1
        self.joins += 1
        self.bookkeeping.on_leaf_added(parent, child)
        if self.backups is not None:
            self.backups.on_leaf_added(parent, child)
        self._dirty_mem.update((parent, child))
        self._cascade(child, anchors)

    def _leaving(self, leaf: int) -> None:
        if not self.dynamic_mode:
            raise InvalidEvent("deletions need the leaf-dynamic scheme")
        net = self.net
        parent = net.parent[leaf]
        snap = self.backups.read_copy(parent, leaf)
        top = self.states[leaf].top_scope
        pst = self.states[parent]
        for l in range(top + 1, self.levels + 1):
            pst.ever_share[l] += snap["ever_share"][l]
        self.bookkeeping.on_child_removed(parent, leaf, snap)
        self.backups.on_child_removed(parent, leaf)
        del self.states[leaf]
        self._dirty_mem.add(parent)
        self._dirty_mem.discard(leaf)
        self._dirty_labels.discard(leaf)

    # -- reset cascade ---------------------------------------------------

    def _cascade(self, child: int, anchors) -> None:
        net = self.net
        level, root = 1, anchors[1]
        net.charge_path(child, root, "signal")
        members = self._reset(level, root)
        while True:
            rst = self.states[root]
            rst.tally[level] += 1
            if rst.tally[level] < self.quota:
                if level >= 2:
                    self._seed_fresh_scopes(members, level)
                return
            if level == self.levels:
                self._top_finished()
                return
            nxt = anchors[level + 1]
            net.charge_path(root, nxt, "signal")
            level, root = level + 1, nxt
            members = self._reset(level, root)

    def _top_finished(self) -> None:
        self.finished = True
        if self.on_finished is not None:
            self.on_finished(self.last_reset_count)

    def _reset(self, level: int, root: int):
        """Count and relabel one decomposition subtree."""
        net = self.net
        if self.states[root].top_scope < level:
            raise SchemeError(f"reset target {root} is not a level-{level} scope root")
        members = self._collect_scope(level, root)
        mset = set(members)
        count = self._count_scope(root, mset, level)
        labels = self.pi.marker(net, root, mset)
        if len(set(labels.values())) != len(labels):
            raise SchemeError("marker produced duplicate labels")
        for w in members:
            st = self.states[w]
            lab = labels[w]
            for l in range(1, level + 1):
                st.statics[l] = lab
            for l in range(1, level):
                st.ever_share[l] = 1
        if level == self.levels:
            self.bookkeeping.on_whole_tree_reset(members)
        else:
            self.bookkeeping.on_reset(members, level)
        net.ledger.reset_count += 1
        self.epoch += 1
        self.last_reset_labels = labels
        self.last_reset_members = members
        self.last_reset_count = count
        self._dirty_labels.update(members)
        self._dirty_mem.update(members)
        return members

    def _count_scope(self, root, mset, level) -> int:
        if self.count_ever:
            agg = lambda w: self.states[w].ever_share[level]
        else:
            agg = lambda w: 1
        return self.net.broadcast_convergecast(
            root, lambda p, c: c in mset, agg, category="reset_count")

    def _seed_fresh_scopes(self, members, level: int) -> None:
        """Every member becomes the root of fresh scopes below `level`."""
        net = self.net
        if len(members) > 1:
            net.ledger.count("broadcast", len(members) - 1)
        for w in members:
            st = self.states[w]
            if st.top_scope < level - 1:
                st.top_scope = level - 1
            for l in range(1, level):
                st.tally[l] = 0
                st.ever_count[l] = 1
            for l in range(2, level + 1):
                st.links[l] = self.fn.self_value(net, w)
        self._dirty_mem.update(members)
        self._dirty_labels.update(members)

    def _collect_scope(self, level: int, root: int):
        members = [root]
        stack = [root]
        while stack:
            v = stack.pop()
            if level == self.levels:
                kids = self.net.children_by_port(v)
            else:
                kids = self.bookkeeping.children_in_scope(v, level)
            if self.verify_scopes:
                truth = self.ground_children_in_scope(v, level)
                if sorted(kids) != sorted(truth):
                    self.violations.append(
                        f"scope query at node {v} level {level}: "
                        f"{sorted(kids)} != {sorted(truth)}")
                    kids = truth
            members.extend(kids)
            stack.extend(kids)
        return members

    def ground_children_in_scope(self, v: int, level: int):
        if level >= self.levels:
            return list(self.net.children[v])
        return [c for c in self.net.children[v]
                if self.states[c].top_scope < level]

    # -- labels and decoding ------------------------------------------------

    def _anchors(self, w: int):
        anchors = [None] * (self.levels + 1)
        filled = 0
        x = w
        while True:
            t = min(self.states[x].top_scope, self.levels)
            if t > filled:
                for l in range(filled + 1, t + 1):
                    anchors[l] = x
                filled = t
            if filled >= self.levels:
                return anchors
            x = self.net.parent[x]
            if x is None:
                raise SchemeError("root is not flagged at the top level")

    def label(self, w: int):
        if not self.net.is_alive(w):
            raise SchemeError(f"node {w} is not alive")
        anchors = self._anchors(w)
        st = self.states[w]
        lab = ("L", st.statics[1])
        for l in range(2, self.levels + 1):
            if self.states[anchors[l]].tally[l] >= 1:
                lab = ("N", self.states[anchors[l - 1]].statics[l],
                       st.links[l], lab)
        return lab

    def query(self, u: int, v: int):
        return decode_labels(self.fn, self.pi, self.label(u), self.label(v))

    def label_bits(self, w: int) -> int:
        return dynamic_label_bits(self.pi, self.fn, self.label(w))

    # -- per-event bookkeeping ------------------------------------------------

    def mark_memory_dirty(self, nodes) -> None:
        self._dirty_mem.update(nodes)

    def _flush_event(self) -> None:
        net = self.net
        if self.backups is not None:
            for x in sorted(self._dirty_mem):
                if net.is_alive(x) and x != net.root:
                    self.backups.refresh(x)
        for w in sorted(self._dirty_labels):
            if net.is_alive(w):
                net.ledger.note_label_bits(self.label_bits(w))
        for x in sorted(self._dirty_mem):
            if net.is_alive(x):
                net.ledger.note_memory_bits(self.memory_bits(x))
        self._dirty_labels.clear()
        self._dirty_mem.clear()

    def memory_bits(self, v: int) -> int:
        st = self.states[v]
        n = self.levels + int_bits(self.net.depth[v])
        n += sum(int_bits(x) for x in st.tally[1:])
        n += sum(int_bits(x) for x in st.ever_share[1:])
        n += self.bookkeeping.memory_bits(v)
        if self.backups is not None:
            n += self.backups.held_bits(v)
        return n

    # -- invariant scanning -----------------------------------------------

    def all_anchors(self) -> dict:
        root = self.net.root
        out = {root: tuple([None] + [root] * self.levels)}
        stack = [root]
        while stack:
            v = stack.pop()
            base = out[v]
            for c in self.net.children[v]:
                t = min(self.states[c].top_scope, self.levels)
                if t:
                    an = list(base)
                    for l in range(1, t + 1):
                        an[l] = c
                    out[c] = tuple(an)
                else:
                    out[c] = base
                stack.append(c)
        return out

    def scan_invariants(self) -> list[str]:
        out = []
        net = self.net
        out.extend(net.check_tree_shape())
        out.extend(net.check_port_uniqueness())
        if self.finished:
            # terminal state: the final whole-tree reset has cleared the
            # per-level bookkeeping and nothing re-seeds the scopes
            return out
        anchors = self.all_anchors()
        if self.states[net.root].top_scope != self.levels:
            out.append("root is not a top-level scope root")
        # ever-count invariant: per scope, shares sum to the joined-ever count
        sums = {}
        for v, an in anchors.items():
            st = self.states[v]
            for l in range(1, self.levels + 1):
                key = (l, an[l])
                sums[key] = sums.get(key, 0) + st.ever_share[l]
        for (l, r), total in sums.items():
            want = self.states[r].ever_count[l]
            if total != want:
                out.append(f"ever-share sum of level-{l} scope at {r}: "
                           f"{total} != {want}")
        # nesting and descendant closure
        for v, an in anchors.items():
            for l in range(1, self.levels):
                if anchors[an[l]][l + 1] != an[l + 1]:
                    out.append(f"scope nesting broken at node {v} level {l}")
            for c in net.children[v]:
                for l in range(1, self.levels + 1):
                    if an[l] != v and anchors[c][l] != an[l]:
                        out.append(f"descendant closure broken at {v}->{c} "
                                   f"level {l}")
        for v in anchors:
            out.extend(self.bookkeeping.check(v))
        if self.backups is not None:
            out.extend(self.backups.check())
        out.extend(self.violations)
        return out


# -- pure decoding over assembled labels -------------------------------------


def decode_labels(fn, pi, lx, ly):
    """Evaluate F from two labels alone."""
    while True:
        tx, ty = lx[0], ly[0]
        if tx == "L" and ty == "L":
            return pi.decoder(lx[1], ly[1])
        if tx == "N" and ty == "N":
            if lx[1] == ly[1]:
                lx, ly = lx[3], ly[3]
                continue
            mid = pi.decoder(lx[1], ly[1])
            return fn.compose(fn.reverse(lx[2]), fn.compose(mid, ly[2]))
        raise DecodeError("mismatched label nesting")


def dynamic_label_bits(pi, fn, lab) -> int:
    n = 0
    while lab[0] == "N":
        n += 1 + bits.block_len(pi.label_bits(lab[1]))
        n += bits.block_len(fn.encoded_len(lab[2]))
        lab = lab[3]
    return n + 1 + bits.block_len(pi.label_bits(lab[1]))


def encode_dynamic_label(pi, fn, lab) -> str:
    parts = []
    while lab[0] == "N":
        parts.append("1" + bits.block(pi.encode_label(lab[1]))
                     + bits.block(fn.encode(lab[2])))
        lab = lab[3]
    parts.append("0" + bits.block(pi.encode_label(lab[1])))
    return "".join(parts)


def decode_dynamic_label(pi, fn, s: str, pos: int = 0):
    if pos >= len(s):
        raise bits.BitsError("empty label wire")
    tag = s[pos]
    if tag == "0":
        payload, pos = bits.read_block(s, pos + 1)
        static, _ = pi.decode_label(payload, 0)
        return ("L", static), pos
    payload, pos = bits.read_block(s, pos + 1)
    static, _ = pi.decode_label(payload, 0)
    fpayload, pos = bits.read_block(s, pos)
    fval, _ = fn.decode(fpayload, 0)
    inner, pos = decode_dynamic_label(pi, fn, s, pos)
    return ("N", static, fval, inner), pos
