"""Per-node external memory: scoped-port bookkeeping and backup copies.

Each node must be able to tell, for every level l below the current
scheme height, which of its ports lead to children inside its level-l
subtree.  Two strategies are provided:

* designer: the node keeps its scoped ports as the contiguous prefix
  1..watermark[l] by renumbering ports on every event (new child takes
  port 1 and shifts the rest, removals compact).

* adversary: ports are immutable, so each child carries a table with
  one slot per level; the union of the first ``count[l]`` children's
  slots (in port order) is exactly the scoped port set.  In the
  leaf-dynamic model every child also carries a back-reference slot
  pointing at the child whose table mentions it, so deletions can be
  repaired from a backup copy.

Backups keep, for every child u of a node v, one copy of u's scheme
memory at either v (when u is an only child) or at u's next sibling in
cyclic port order; no node ever holds more than two copies.
"""

from __future__ import annotations


class MemoryError_(RuntimeError):
    pass


def int_bits(x: int) -> int:
    return 1 + max(1, abs(x).bit_length())


def _counter_list_bits(xs) -> int:
    return sum(int_bits(x) for x in xs)


def _slot_list_bits(xs) -> int:
    return sum(1 if x is None else 1 + int_bits(x) for x in xs)


# -- sibling order helpers ---------------------------------------------------


def sibling_order(net, v):
    return net.children_by_port(v)


def next_sibling(net, v, u, order=None):
    order = order if order is not None else sibling_order(net, v)
    i = order.index(u)
    return order[(i + 1) % len(order)]


def prev_sibling(net, v, u, order=None):
    order = order if order is not None else sibling_order(net, v)
    i = order.index(u)
    return order[(i - 1) % len(order)]


# -- port bookkeeping --------------------------------------------------------


class DesignerBookkeeping:
    """Scoped ports kept as the prefix 1..watermark[l] of v's ports."""

    kind = "designer"
    message_free = True

    def __init__(self, engine):
        self.engine = engine

    def on_leaf_added(self, parent, child):
        st = self.engine.states[parent]
        for l in range(1, self.engine.levels):
            st.watermark[l] += 1

    def on_reset(self, members, level):
        if level <= 1:
            return
        for w in members:
            st = self.engine.states[w]
            for l in range(1, level):
                st.watermark[l] = 0
        self.engine.mark_memory_dirty(members)

    def on_whole_tree_reset(self, members):
        """Top-level reset: normalize ports (parent gets the degree) and
        zero every watermark."""
        net = self.engine.net
        for v in members:
            mapping = {}
            nxt = 1
            for c in sorted(net.children[v], key=net.port_to[v].__getitem__):
                mapping[nxt] = c
                nxt += 1
            p = net.parent[v]
            if p is not None:
                mapping[net.degree(v)] = p
            net.renumber_ports(v, mapping)
            st = self.engine.states[v]
            for l in range(1, self.engine.levels):
                st.watermark[l] = 0
        self.engine.mark_memory_dirty(members)

    def on_child_removed(self, parent, child, snapshot):
        q = self.engine.net.port_to[parent][child]
        st = self.engine.states[parent]
        for l in range(1, self.engine.levels):
            if st.watermark[l] >= q:
                st.watermark[l] -= 1
        self.engine.mark_memory_dirty([parent])

    def scoped_ports(self, v, level):
        return set(range(1, self.engine.states[v].watermark[level] + 1))

    def children_in_scope(self, v, level):
        net = self.engine.net
        return [net.ports[v][p] for p in
                range(1, self.engine.states[v].watermark[level] + 1)]

    def memory_bits(self, v):
        st = self.engine.states[v]
        n = _counter_list_bits(st.watermark[1:self.engine.levels])
        p = self.engine.net.parent[v]
        if p is not None:
            n += int_bits(self.engine.net.port_to[v][p])
        return n

    def check(self, v) -> list[str]:
        out = []
        for l in range(1, self.engine.levels):
            want = {self.engine.net.port_to[v][c]
                    for c in self.engine.ground_children_in_scope(v, l)}
            got = self.scoped_ports(v, l)
            if got != want:
                out.append(f"designer watermark at node {v} level {l}: "
                           f"{sorted(got)} != {sorted(want)}")
        return out


class AdversaryBookkeeping:
    """Per-child table slots whose prefix union is the scoped port set."""

    kind = "adversary"
    message_free = False

    def __init__(self, engine, with_backrefs):
        self.engine = engine
        self.with_backrefs = with_backrefs

    def _write(self, nodes):
        nodes = set(nodes)
        self.engine.net.ledger.count("membook", len(nodes))
        self.engine.mark_memory_dirty(nodes)

    def on_leaf_added(self, parent, child):
        net = self.engine.net
        states = self.engine.states
        order = sibling_order(net, parent)
        j = order.index(child) + 1
        port_u = net.port_to[parent][child]
        vst = states[parent]
        touched = set()
        for l in range(1, self.engine.levels):
            c = vst.scoped_count[l]
            if j <= c:
                states[child].slot_table[l] = port_u
                if self.with_backrefs:
                    states[child].slot_backref[l] = port_u
                touched.add(child)
            else:
                target = order[c]
                states[target].slot_table[l] = port_u
                touched.add(target)
                if self.with_backrefs:
                    states[child].slot_backref[l] = net.port_to[parent][target]
                    touched.add(child)
            vst.scoped_count[l] = c + 1
        if touched:
            self._write(touched)
        self.engine.mark_memory_dirty([parent])

    def on_reset(self, members, level):
        if level <= 1:
            return
        net = self.engine.net
        states = self.engine.states
        member_set = set(members)
        touched = set()
        for v in members:
            vst = states[v]
            order = sibling_order(net, v)
            for l in range(1, level):
                for i in range(vst.scoped_count[l]):
                    states[order[i]].slot_table[l] = None
                    touched.add(order[i])
                vst.scoped_count[l] = 0
            if self.with_backrefs:
                for c in net.children[v]:
                    if c in member_set:
                        for l in range(1, level):
                            if states[c].slot_backref[l] is not None:
                                states[c].slot_backref[l] = None
                                touched.add(c)
        if touched:
            self._write(touched)
        self.engine.mark_memory_dirty(members)

    def on_whole_tree_reset(self, members):
        self.on_reset(members, self.engine.levels)

    def on_child_removed(self, parent, child, snapshot):
        """Repair tables and counters from the deleted child's backup."""
        net = self.engine.net
        states = self.engine.states
        vst = states[parent]
        order_pre = sibling_order(net, parent)
        order_post = [w for w in order_pre if w != child]
        j = order_pre.index(child) + 1
        pt = net.port_to[parent]
        by_port = {pt[w]: w for w in order_pre}
        touched = set()
        for l in range(1, self.engine.levels):
            c = vst.scoped_count[l]
            tbl_u = snapshot["slot_table"][l]
            ref_u = snapshot["slot_backref"][l]
            if j <= c:
                x = by_port[tbl_u]
                if x == child:
                    vst.scoped_count[l] = c - 1
                elif ref_u is None:
                    target = order_post[c - 1]
                    states[target].slot_table[l] = tbl_u
                    states[x].slot_backref[l] = pt[target]
                    touched.update((target, x))
                else:
                    w = by_port[ref_u]
                    states[w].slot_table[l] = tbl_u
                    states[x].slot_backref[l] = pt[w]
                    vst.scoped_count[l] = c - 1
                    touched.update((w, x))
            elif ref_u is not None:
                w = by_port[ref_u]
                target = order_post[c - 1]
                port_y = states[target].slot_table[l]
                y = by_port[port_y]
                states[w].slot_table[l] = port_y
                states[target].slot_table[l] = None
                vst.scoped_count[l] = c - 1
                touched.update((w, target))
                if y != child:
                    states[y].slot_backref[l] = pt[w]
                    touched.add(y)
        touched.discard(child)
        if touched:
            self._write(touched)
        self.engine.mark_memory_dirty([parent])

    def scoped_ports(self, v, level):
        net = self.engine.net
        states = self.engine.states
        order = sibling_order(net, v)
        c = self.engine.states[v].scoped_count[level]
        net.ledger.count("membook", 2 * c)
        return {states[order[i]].slot_table[level] for i in range(c)}

    def children_in_scope(self, v, level):
        net = self.engine.net
        return sorted((net.ports[v][p] for p in self.scoped_ports(v, level)),
                      key=lambda w: net.port_to[v][w])

    def memory_bits(self, v):
        st = self.engine.states[v]
        lv = self.engine.levels
        n = _counter_list_bits(st.scoped_count[1:lv])
        n += _slot_list_bits(st.slot_table[1:lv])
        if self.with_backrefs:
            n += _slot_list_bits(st.slot_backref[1:lv])
        p = self.engine.net.parent[v]
        if p is not None:
            n += int_bits(self.engine.net.port_to[v][p])
        return n

    def check(self, v) -> list[str]:
        out = []
        net = self.engine.net
        states = self.engine.states
        order = sibling_order(net, v)
        pt = net.port_to[v]
        for l in range(1, self.engine.levels):
            want = {pt[c] for c in self.engine.ground_children_in_scope(v, l)}
            c = states[v].scoped_count[l]
            if c != len(want):
                out.append(f"adversary count at node {v} level {l}: "
                           f"{c} != {len(want)}")
                continue
            got = {states[order[i]].slot_table[l] for i in range(c)}
            if got != want:
                out.append(f"adversary tables at node {v} level {l}: "
                           f"{sorted(map(str, got))} != {sorted(map(str, want))}")
            if self.with_backrefs:
                for u in order:
                    ref = states[u].slot_backref[l]
                    if (ref is None) != (pt[u] not in want):
                        out.append(f"adversary backref presence at node {v} "
                                   f"level {l} child {u}")
                    elif ref is not None:
                        w = net.ports[v].get(ref)
                        if w is None or states[w].slot_table[l] != pt[u]:
                            out.append(f"adversary backref target at node {v} "
                                       f"level {l} child {u}")
        return out


# -- backup copies -----------------------------------------------------------


SNAPSHOT_FIELDS = ("tally", "ever_share", "watermark", "scoped_count",
                   "slot_table", "slot_backref")


def take_snapshot(state) -> dict:
    snap = {f: list(getattr(state, f)) for f in SNAPSHOT_FIELDS}
    snap["top_scope"] = state.top_scope
    return snap


def snapshot_bits(snap) -> int:
    n = int_bits(snap["top_scope"])
    for f in ("tally", "ever_share", "watermark", "scoped_count"):
        n += _counter_list_bits(snap[f])
    for f in ("slot_table", "slot_backref"):
        n += _slot_list_bits(snap[f])
    return n


class BackupStore:
    """Copies of child scheme memories at the parent or next sibling."""

    def __init__(self, engine):
        self.engine = engine
        self.copies = {}        # holder -> {subject: snapshot}

    def _erase(self, holder, subject):
        held = self.copies.get(holder)
        if held is not None:
            held.pop(subject, None)

    def _erase_subject_everywhere(self, subject, parent, order):
        for holder in (parent, *order):
            self._erase(holder, subject)

    def _place(self, holder, subject):
        net = self.engine.net
        snap = take_snapshot(self.engine.states[subject])
        self.copies.setdefault(holder, {})[subject] = snap
        # a hop to the parent, two when relayed on to a sibling
        net.ledger.count("backup", 1 if holder == net.parent[subject] else 2)

    def refresh(self, subject):
        """Re-place the canonical copy after subject's memory changed."""
        net = self.engine.net
        v = net.parent[subject]
        if v is None:
            return
        order = sibling_order(net, v)
        if len(order) == 1:
            for s in list(self.copies.get(v, ())):
                if s in order and s != subject:
                    self._erase(v, s)
            self._erase_subject_everywhere(subject, v, order)
            self._place(v, subject)
        else:
            nxt = next_sibling(net, v, subject, order)
            for s in list(self.copies.get(nxt, ())):
                if s in order and s != subject:
                    self._erase(nxt, s)
            self._erase_subject_everywhere(subject, v, order)
            self._place(nxt, subject)

    def on_leaf_added(self, parent, child):
        net = self.engine.net
        order = sibling_order(net, parent)
        if len(order) == 1:
            self._place(parent, child)
        else:
            nxt = next_sibling(net, parent, child, order)
            for s in list(self.copies.get(nxt, ())):
                if s in order and s != child:
                    self._erase(nxt, s)
            self._place(nxt, child)
            self._place(child, prev_sibling(net, parent, child, order))

    def read_copy(self, parent, child) -> dict:
        """Fetch the copy of a child's memory; charged if held by a sibling."""
        net = self.engine.net
        held = self.copies.get(parent, {})
        if child in held:
            return held[child]
        nxt = next_sibling(net, parent, child)
        held = self.copies.get(nxt, {})
        if child in held:
            net.ledger.count("backup", 2)
            return held[child]
        raise MemoryError_(f"no backup copy of node {child}")

    def on_child_removed(self, parent, child):
        """Re-home copies after the deletion of one child."""
        net = self.engine.net
        order_pre = sibling_order(net, parent)
        order_post = [w for w in order_pre if w != child]
        if len(order_post) == 1:
            w = order_post[0]
            for s in list(self.copies.get(parent, ())):
                if s in order_pre and s != w:
                    self._erase(parent, s)
            self._erase_subject_everywhere(w, parent, order_pre)
            self._place(parent, w)
        elif len(order_post) > 1:
            nxt = next_sibling(net, parent, child, order_pre)
            pre = prev_sibling(net, parent, child, order_pre)
            self._erase(nxt, child)
            self._erase_subject_everywhere(pre, parent, order_pre)
            self._place(nxt, pre)
        self._erase_subject_everywhere(child, parent, order_pre)
        self.copies.pop(child, None)

    def held_bits(self, holder) -> int:
        return sum(snapshot_bits(s) for s in self.copies.get(holder, {}).values())

    def check(self) -> list[str]:
        out = []
        net = self.engine.net
        for v in net.alive_nodes():
            for u in net.children[v]:
                order = sibling_order(net, v)
                nxt = next_sibling(net, v, u, order)
                if (u not in self.copies.get(v, {})
                        and u not in self.copies.get(nxt, {})):
                    out.append(f"no copy of child {u} at {v} or {nxt}")
        for holder, held in self.copies.items():
            if not net.is_alive(holder) and held:
                out.append(f"dead node {holder} holds copies")
            if len(held) > 2:
                out.append(f"node {holder} holds {len(held)} copies")
        return out
