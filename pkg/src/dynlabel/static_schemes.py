"""Static labeling schemes run as root-coordinated marker protocols.

A marker labels every member of a connected subtree in one invocation,
charged as a traversal that crosses each subtree edge once in each
direction (2*(m-1) messages for m members).  Decoders are pure
functions of two labels from the same invocation.

Schemes provided:

* ancestry  -- depth-first intervals [a, b]; ancestor intervals contain
  descendant intervals,
* distance  -- centroid-separator entries (separator id, distance) per
  decomposition level plus the node's global depth,
* seplevel  -- the distance labels decoded to the depth of the nearest
  common ancestor,
* routing   -- depth-first intervals plus parent/heavy-child ports and
  the list of light ports on the path from the subtree root, giving an
  exact two-label first-hop decoder without renumbering any ports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import bits
from .functions import ROUTE_SELF


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class StaticScheme:
    name: str
    marker: Callable          # (net, root, members) -> {node: label}
    decoder: Callable         # (label_u, label_v) -> F value
    encode_label: Callable    # label -> bit string
    decode_label: Callable    # (bits, pos) -> (label, pos)
    label_bits: Callable      # label -> exact bit count
    ls_budget: Callable       # n -> bit budget
    mc_budget: Callable       # n -> message budget

    def unique_labels(self, labels) -> bool:
        vals = list(labels.values())
        return len(vals) == len(set(vals))


def _charge_traversal(net, root, members):
    """Walk every subtree edge down and back, one message per crossing."""
    seen = 0
    before = net.ledger.messages_total
    stack = [root]
    while stack:
        v = stack.pop()
        seen += 1
        for c in net.children_by_port(v):
            if c in members:
                net.send(v, net.port_to[v][c], category="marker")
                net.send(c, net.port_to[c][v], category="marker")
                stack.append(c)
    net.ledger.note_marker(net.ledger.messages_total - before)
    if seen != len(members):
        raise DecodeError("marker scope is not connected")


def _scope_children(net, members):
    return {v: [c for c in net.children_by_port(v) if c in members]
            for v in members}


# -- ancestry: depth-first intervals ---------------------------------------


def dfs_interval_marker(net, root, members):
    members = set(members)
    _charge_traversal(net, root, members)
    kids = _scope_children(net, members)
    a, b = {}, {}
    counter = 0
    stack = [(root, False)]
    while stack:
        v, done = stack.pop()
        if done:
            b[v] = max((b[c] for c in kids[v]), default=a[v])
            continue
        counter += 1
        a[v] = counter
        b[v] = counter
        stack.append((v, True))
        for c in reversed(kids[v]):
            stack.append((c, False))
    return {v: ("iv", a[v], b[v]) for v in members}


def dfs_interval_decode(lu, lv):
    """Ancestor-or-self in both directions from interval containment."""
    _, au, bu = lu
    _, av, bv = lv
    return (au <= av <= bu, av <= au <= bv)


def _iv_encode(lab):
    return bits.uint(lab[1]) + bits.uint(lab[2] - lab[1])


def _iv_decode(s, pos=0):
    a, pos = bits.read_uint(s, pos)
    d, pos = bits.read_uint(s, pos)
    return ("iv", a, a + d), pos


def _iv_bits(lab):
    return bits.uint_len(lab[1]) + bits.uint_len(lab[2] - lab[1])


# -- distance / separation level: centroid separators ----------------------


def separator_marker(net, root, members):
    """Recursive centroid decomposition; labels carry one (separator,
    distance) entry per level plus the node's depth in the whole tree."""
    members = set(members)
    _charge_traversal(net, root, members)
    kids = _scope_children(net, members)
    nbrs = {}
    for v in members:
        out = list(kids[v])
        p = net.parent[v]
        if p in members:
            out.append(p)
        nbrs[v] = out
    uid = {v: i for i, v in enumerate(sorted(members))}
    entries = {v: [] for v in members}
    removed = set()
    work = [root]
    while work:
        seed = work.pop()
        comp = _component(seed, nbrs, removed)
        c = _centroid(comp, seed, nbrs, removed)
        dist = _bfs_dist(c, nbrs, removed, comp)
        for v in comp:
            entries[v].append((uid[c], dist[v]))
        removed.add(c)
        for w in nbrs[c]:
            if w in comp and w not in removed:
                work.append(w)
    return {v: ("sep", uid[v], net.depth[v], tuple(entries[v]))
            for v in members}


def _component(seed, nbrs, removed):
    seen = {seed}
    stack = [seed]
    while stack:
        v = stack.pop()
        for w in nbrs[v]:
            if w not in removed and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def _centroid(comp, seed, nbrs, removed):
    """Minimize the largest part left by removal; ties to smallest id."""
    m = len(comp)
    order = []
    par = {seed: None}
    stack = [seed]
    while stack:
        v = stack.pop()
        order.append(v)
        for w in nbrs[v]:
            if w in comp and w not in removed and w != par[v]:
                par[w] = v
                stack.append(w)
    size = {v: 1 for v in comp}
    for v in reversed(order):
        if par[v] is not None:
            size[par[v]] += size[v]
    best, best_key = None, None
    for v in comp:
        worst = m - size[v]
        for w in nbrs[v]:
            if w in comp and w not in removed and par.get(w) == v:
                worst = max(worst, size[w])
        key = (worst, v)
        if best_key is None or key < best_key:
            best, best_key = v, key
    return best


def _bfs_dist(start, nbrs, removed, comp):
    dist = {start: 0}
    queue = [start]
    while queue:
        nxt = []
        for v in queue:
            for w in nbrs[v]:
                if w in comp and w not in removed and w not in dist:
                    dist[w] = dist[v] + 1
                    nxt.append(w)
        queue = nxt
    return dist


def separator_distance_decode(lu, lv):
    best = None
    for (su, du), (sv, dv) in zip(lu[3], lv[3]):
        if su != sv:
            break
        if best is None or du + dv < best:
            best = du + dv
    if best is None:
        raise DecodeError("labels share no separator level")
    return best


def separator_seplevel_decode(lu, lv):
    d = separator_distance_decode(lu, lv)
    total = lu[2] + lv[2] - d
    if total % 2:
        raise DecodeError("inconsistent depths in separator labels")
    return total // 2


def _sep_encode(lab):
    out = [bits.uint(lab[1]), bits.uint(lab[2]), bits.uint(len(lab[3]))]
    for sid, d in lab[3]:
        out.append(bits.uint(sid))
        out.append(bits.uint(d))
    return "".join(out)


def _sep_decode(s, pos=0):
    uid, pos = bits.read_uint(s, pos)
    depth, pos = bits.read_uint(s, pos)
    n, pos = bits.read_uint(s, pos)
    entries = []
    for _ in range(n):
        sid, pos = bits.read_uint(s, pos)
        d, pos = bits.read_uint(s, pos)
        entries.append((sid, d))
    return ("sep", uid, depth, tuple(entries)), pos


def _sep_bits(lab):
    n = bits.uint_len(lab[1]) + bits.uint_len(lab[2]) + bits.uint_len(len(lab[3]))
    for sid, d in lab[3]:
        n += bits.uint_len(sid) + bits.uint_len(d)
    return n


# -- routing: intervals plus light-edge port lists --------------------------


def routing_marker(net, root, members):
    members = set(members)
    _charge_traversal(net, root, members)
    kids = _scope_children(net, members)
    size = {}
    for v in _postorder(root, kids):
        size[v] = 1 + sum(size[c] for c in kids[v])
    heavy = {}
    for v in members:
        if kids[v]:
            heavy[v] = max(kids[v], key=lambda c: (size[c], -net.port_to[v][c]))
        else:
            heavy[v] = None
    a = {}
    light = {}
    counter = 0
    # preorder with the heavy child first keeps light lists logarithmic
    stack = [(root, ())]
    while stack:
        v, acc = stack.pop()
        counter += 1
        a[v] = counter
        light[v] = acc
        order = []
        if heavy[v] is not None:
            order.append((heavy[v], acc))
        for c in kids[v]:
            if c != heavy[v]:
                order.append((c, acc + ((a[v], net.port_to[v][c]),)))
        for item in reversed(order):
            stack.append(item)
    out = {}
    for v in members:
        pp = -1 if net.parent[v] is None else net.port_to[v][net.parent[v]]
        hp = -1 if heavy[v] is None else net.port_to[v][heavy[v]]
        out[v] = ("rt", a[v], a[v] + size[v] - 1, pp, hp, light[v])
    return out


def _postorder(root, kids):
    order = []
    stack = [root]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(kids[v])
    return reversed(order)


def _routing_hop(lu, lv):
    """Port at the node labeled lu of the first hop toward lv."""
    _, au, bu, pp, hp, _ = lu
    av = lv[1]
    if not (au <= av <= bu):
        if pp < 0:
            raise DecodeError("routing target outside a rootless scope")
        return pp
    for anc_a, port in lv[5]:
        if anc_a == au:
            return port
    if hp < 0:
        raise DecodeError("leaf label asked for a downward hop")
    return hp


def routing_decode(lu, lv):
    if lu[1] == lv[1]:
        return ROUTE_SELF
    return ("port", _routing_hop(lu, lv), _routing_hop(lv, lu))


def _rt_encode(lab):
    out = [bits.uint(lab[1]), bits.uint(lab[2] - lab[1]),
           bits.sint(lab[3]), bits.sint(lab[4]), bits.uint(len(lab[5]))]
    for anc_a, port in lab[5]:
        out.append(bits.uint(anc_a))
        out.append(bits.uint(port))
    return "".join(out)


def _rt_decode(s, pos=0):
    a, pos = bits.read_uint(s, pos)
    d, pos = bits.read_uint(s, pos)
    pp, pos = bits.read_sint(s, pos)
    hp, pos = bits.read_sint(s, pos)
    n, pos = bits.read_uint(s, pos)
    light = []
    for _ in range(n):
        anc_a, pos = bits.read_uint(s, pos)
        port, pos = bits.read_uint(s, pos)
        light.append((anc_a, port))
    return ("rt", a, a + d, pp, hp, tuple(light)), pos


def _rt_bits(lab):
    n = (bits.uint_len(lab[1]) + bits.uint_len(lab[2] - lab[1]) +
         len(bits.sint(lab[3])) + len(bits.sint(lab[4])) +
         bits.uint_len(len(lab[5])))
    for anc_a, port in lab[5]:
        n += bits.uint_len(anc_a) + bits.uint_len(port)
    return n


# -- registry ----------------------------------------------------------------


def _log2c(n):
    return max(1, (max(n, 2) - 1).bit_length())


def _ls_interval(n):
    return 4 * _log2c(n) + 6


def _ls_separator(n):
    lg = _log2c(n)
    return 4 * lg * (lg + 2) + 4 * lg + 8


def _ls_routing(n, port_cap_bits=21):
    lg = _log2c(n)
    return 2 * lg * (lg + port_cap_bits) + 6 * lg + 4 * port_cap_bits + 12


def _mc_linear(n):
    return 2 * n


SCHEMES = {
    "ancestry": StaticScheme(
        "ancestry", dfs_interval_marker, dfs_interval_decode,
        _iv_encode, _iv_decode, _iv_bits, _ls_interval, _mc_linear),
    "distance": StaticScheme(
        "distance", separator_marker, separator_distance_decode,
        _sep_encode, _sep_decode, _sep_bits, _ls_separator, _mc_linear),
    "seplevel": StaticScheme(
        "seplevel", separator_marker, separator_seplevel_decode,
        _sep_encode, _sep_decode, _sep_bits, _ls_separator, _mc_linear),
    "routing": StaticScheme(
        "routing", routing_marker, routing_decode,
        _rt_encode, _rt_decode, _rt_bits, _ls_routing, _mc_linear),
}


def scheme_for(function_name: str) -> StaticScheme:
    try:
        return SCHEMES[function_name]
    except KeyError:
        raise DecodeError(f"no static scheme for {function_name!r}") from None
