"""Tree functions, their brute-force oracles and value algebra.

Each supported function F on node pairs provides:

* ``oracle(net, u, v)``  -- exact value from an explicit tree walk,
  used as ground truth throughout the test harness,
* ``compose(a, b)``      -- combine F(u,w) and F(w,v) into F(u,v) for
  any w on the u-v path,
* ``reverse(a)``         -- F(v,u) from F(u,v),
* ``self_value(net, w)`` / ``edge_value(net, parent, child)`` -- the
  values a node can produce locally, used for incremental label
  maintenance,
* ``encode(v)`` / ``decode(bits, pos)`` -- compact bit encoding.

Values are plain tuples/ints so the query hot path stays cheap:

* ancestry     -> ``(u_before_v, v_before_u)`` booleans (ancestor-or-self)
* distance     -> int (edge count)
* seplevel     -> int (depth of the nearest common ancestor)
* routing      -> ``("self",)`` or ``("port", fwd, bwd)`` with fwd the
  first-hop port at the first argument toward the second.
"""

from __future__ import annotations

from . import bits

ROUTE_SELF = ("self",)


class FunctionError(ValueError):
    pass


def _walk_to_depth(net, x, d):
    while net.depth[x] > d:
        x = net.parent[x]
    return x


def nca(net, u, v):
    """Nearest common ancestor of two alive nodes."""
    x, y = u, v
    d = min(net.depth[x], net.depth[y])
    x = _walk_to_depth(net, x, d)
    y = _walk_to_depth(net, y, d)
    while x != y:
        x = net.parent[x]
        y = net.parent[y]
    return x


def first_hop_port(net, u, v):
    """Port at u of the first edge on the path toward v (u != v)."""
    a = nca(net, u, v)
    if u != a:
        return net.port_to[u][net.parent[u]]
    # v is a strict descendant of u: step v up to depth(u)+1
    c = _walk_to_depth(net, v, net.depth[u] + 1)
    return net.port_to[u][c]


class TreeFunction:
    """Base for the supported functions; subclasses fill in the algebra."""

    name = ""
    symmetric = True

    def oracle(self, net, u, v):
        raise NotImplementedError

    def compose(self, a, b):
        raise NotImplementedError

    def reverse(self, a):
        return a

    def self_value(self, net, w):
        raise NotImplementedError

    def edge_value(self, net, parent, child):
        """F(parent, child) for a tree edge, known locally at creation."""
        raise NotImplementedError

    def encode(self, value) -> str:
        raise NotImplementedError

    def decode(self, s: str, pos: int = 0):
        raise NotImplementedError

    def encoded_len(self, value) -> int:
        return len(self.encode(value))


class Ancestry(TreeFunction):
    name = "ancestry"

    def oracle(self, net, u, v):
        a = nca(net, u, v)
        return (a == u, a == v)

    def compose(self, a, b):
        return (a[0] and b[0], a[1] and b[1])

    def reverse(self, a):
        return (a[1], a[0])

    def self_value(self, net, w):
        return (True, True)

    def edge_value(self, net, parent, child):
        return (True, False)

    def encode(self, value):
        return ("1" if value[0] else "0") + ("1" if value[1] else "0")

    def decode(self, s, pos=0):
        if pos + 2 > len(s):
            raise bits.BitsError("truncated ancestry value")
        return (s[pos] == "1", s[pos + 1] == "1"), pos + 2


class Distance(TreeFunction):
    name = "distance"

    def oracle(self, net, u, v):
        a = nca(net, u, v)
        return net.depth[u] + net.depth[v] - 2 * net.depth[a]

    def compose(self, a, b):
        return a + b

    def self_value(self, net, w):
        return 0

    def edge_value(self, net, parent, child):
        return 1

    def encode(self, value):
        return bits.uint(value)

    def decode(self, s, pos=0):
        return bits.read_uint(s, pos)

    def encoded_len(self, value):
        return bits.uint_len(value)


class SeparationLevel(TreeFunction):
    name = "seplevel"

    def oracle(self, net, u, v):
        return net.depth[nca(net, u, v)]

    def compose(self, a, b):
        return min(a, b)

    def self_value(self, net, w):
        return net.depth[w]

    def edge_value(self, net, parent, child):
        return net.depth[parent]

    def encode(self, value):
        return bits.uint(value)

    def decode(self, s, pos=0):
        return bits.read_uint(s, pos)

    def encoded_len(self, value):
        return bits.uint_len(value)


class Routing(TreeFunction):
    """First-hop routing; asymmetric, so values carry both directions."""

    name = "routing"
    symmetric = False

    def oracle(self, net, u, v):
        if u == v:
            return ROUTE_SELF
        return ("port", first_hop_port(net, u, v), first_hop_port(net, v, u))

    def compose(self, a, b):
        if a == ROUTE_SELF:
            return b
        if b == ROUTE_SELF:
            return a
        return ("port", a[1], b[2])

    def reverse(self, a):
        if a == ROUTE_SELF:
            return a
        return ("port", a[2], a[1])

    def self_value(self, net, w):
        return ROUTE_SELF

    def edge_value(self, net, parent, child):
        return ("port", net.port_to[parent][child], net.port_to[child][parent])

    def encode(self, value):
        if value == ROUTE_SELF:
            return "1"
        return "0" + bits.uint(value[1]) + bits.uint(value[2])

    def decode(self, s, pos=0):
        if pos >= len(s):
            raise bits.BitsError("truncated routing value")
        if s[pos] == "1":
            return ROUTE_SELF, pos + 1
        fwd, pos = bits.read_uint(s, pos + 1)
        bwd, pos = bits.read_uint(s, pos)
        return ("port", fwd, bwd), pos

    def encoded_len(self, value):
        if value == ROUTE_SELF:
            return 1
        return 1 + bits.uint_len(value[1]) + bits.uint_len(value[2])


FUNCTIONS = {
    f.name: f for f in (Ancestry(), Distance(), SeparationLevel(), Routing())
}


def get_function(name: str) -> TreeFunction:
    try:
        return FUNCTIONS[name]
    except KeyError:
        raise FunctionError(f"unknown tree function {name!r}") from None


def encode_generic(label_u: str, label_v: str) -> str:
    """Fallback value encoding: the two endpoint static labels verbatim.

    Costs at most two label sizes plus framing, which is the bound the
    per-function encoders above always beat.
    """
    return bits.block(label_u) + bits.block(label_v)


def decode_generic(s: str, pos: int = 0) -> tuple[tuple[str, str], int]:
    a, pos = bits.read_block(s, pos)
    b, pos = bits.read_block(s, pos)
    return (a, b), pos
