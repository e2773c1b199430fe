"""Core directed-graph, edge-coloring and spot types.

Everything downstream (samplers, the reduction, the colorer and the
verifier) works over these primitives.  Graphs are dense: membership of
all n^2 ordered pairs (loops on the diagonal) is always defined.  Spots
are 3-node induced colored subgraphs with unlabeled nodes, canonicalized
over the 6 relabelings; links are their 2-node analogue.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

# Edge colors, ordered for canonicalization: absent < grey < red < green < blank.
ABSENT = 0
GREY = 1
RED = 2
GREEN = 3
BLANK = 4

COLOR_NAMES = {ABSENT: "absent", GREY: "grey", RED: "red", GREEN: "green", BLANK: "blank"}
COLOR_BY_NAME = {v: k for k, v in COLOR_NAMES.items()}
# one-character encoding used in canonical spot strings
COLOR_CHARS = {ABSENT: ".", GREY: "g", RED: "r", GREEN: "n", BLANK: "b"}
COLOR_BY_CHAR = {v: k for k, v in COLOR_CHARS.items()}

# Slot ordering for the 9-slot spot vector: loops of nodes 1,2,3 then arcs
# (1,2),(2,1),(1,3),(3,1),(2,3),(3,2).  Slot 0 is most significant.
ARC_SLOTS = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)]

_POW5 = 5 ** np.arange(8, -1, -1, dtype=np.int64)


def _slot_maps():
    """For each permutation sigma of the 3 node labels, the index map taking
    the original 9-slot vector to the relabeled one."""
    maps = []
    for sigma in itertools.permutations(range(3)):
        # relabeled slot s reads original slot src[s]
        src = [0] * 9
        for i in range(3):
            src[i] = sigma[i]
        for s, (a, b) in enumerate(ARC_SLOTS):
            src[3 + s] = 3 + ARC_SLOTS.index((sigma[a], sigma[b]))
        maps.append(src)
    return np.array(maps, dtype=np.intp)


_SLOT_MAPS = _slot_maps()


def canonical_spot(loops, arcs):
    """Canonical spot of a 3-node colored subgraph.

    `loops` are the 3 loop-slot colors, `arcs` the 6 arc-slot colors in the
    fixed slot order.  Returns the lexicographic minimum over the 6 node
    relabelings, encoded as a base-5 integer (slot 0 most significant).
    """
    vec = np.array(list(loops) + list(arcs), dtype=np.int64)
    return int(np.min(vec[_SLOT_MAPS] @ _POW5))


def canon_spots_batch(vecs):
    """Vectorized canonical_spot over an (m, 9) array of raw slot vectors."""
    vecs = np.asarray(vecs, dtype=np.int64)
    best = None
    for slot_map in _SLOT_MAPS:
        key = vecs[:, slot_map] @ _POW5
        best = key if best is None else np.minimum(best, key, out=best)
    return best


def spot_to_string(spot):
    """Render a canonical spot integer as its 9-character slot string."""
    chars = []
    for _ in range(9):
        spot, d = divmod(spot, 5)
        chars.append(COLOR_CHARS[d])
    return "".join(reversed(chars))


def spot_from_string(s):
    if len(s) != 9:
        raise ValueError("spot string must have 9 slots")
    val = 0
    for ch in s:
        val = val * 5 + COLOR_BY_CHAR[ch]
    return val


class DiGraph:
    """Directed graph on n nodes with optional self-loops, dense storage.

    `adj[u, v]` is truthy iff the edge (u, v) is present; the diagonal
    holds self-loops.  Node identity is stable after construction.
    """

    __slots__ = ("n", "adj")

    def __init__(self, adj):
        adj = np.asarray(adj, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        self.adj = adj
        self.n = adj.shape[0]

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, n), dtype=bool))

    def has_edge(self, u, v):
        return bool(self.adj[u, v])

    def edge_count(self):
        return int(self.adj.sum())

    def loops(self):
        return np.flatnonzero(np.diag(self.adj))

    def copy(self):
        return DiGraph(self.adj.copy())

    def relabel(self, perm):
        """New graph with node i renamed perm[i]."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(self.n)
        return DiGraph(self.adj[np.ix_(inv, inv)])

    def __eq__(self, other):
        return isinstance(other, DiGraph) and np.array_equal(self.adj, other.adj)

    def to_json_obj(self):
        loops = sorted(int(u) for u in self.loops())
        us, vs = np.nonzero(self.adj)
        arcs = [[int(u), int(v)] for u, v in zip(us, vs) if u != v]
        return {"n": self.n, "loops": loops, "arcs": arcs}

    @classmethod
    def from_json_obj(cls, obj):
        g = cls.empty(obj["n"])
        for u in obj["loops"]:
            g.adj[u, u] = True
        for u, v in obj["arcs"]:
            if u == v:
                raise ValueError("loops belong in the 'loops' list")
            g.adj[u, v] = True
        return g


class Coloring:
    """Total color assignment over the present edges of a DiGraph.

    Stored as an (n, n) uint8 matrix; absent pairs must carry ABSENT and
    present edges a non-ABSENT color.
    """

    __slots__ = ("n", "colors")

    def __init__(self, colors):
        colors = np.asarray(colors, dtype=np.uint8)
        if colors.ndim != 2 or colors.shape[0] != colors.shape[1]:
            raise ValueError("color matrix must be square")
        self.colors = colors
        self.n = colors.shape[0]

    @classmethod
    def all_grey(cls, g):
        return cls(np.where(g.adj, GREY, ABSENT).astype(np.uint8))

    def validate(self, g):
        """Raise unless total on g's edges and absent elsewhere."""
        if self.n != g.n:
            raise ValueError("coloring size does not match graph")
        if np.any((self.colors == ABSENT) & g.adj):
            raise ValueError("present edge colored absent")
        if np.any((self.colors != ABSENT) & ~g.adj):
            raise ValueError("missing pair carries a color")

    def blank_count(self):
        return int((self.colors == BLANK).sum())

    def copy(self):
        return Coloring(self.colors.copy())

    def __eq__(self, other):
        return isinstance(other, Coloring) and np.array_equal(self.colors, other.colors)

    def to_json_obj(self):
        us, vs = np.nonzero(self.colors)
        return {"colors": [[int(u), int(v), COLOR_NAMES[int(self.colors[u, v])]]
                           for u, v in zip(us, vs)]}

    @classmethod
    def from_json_obj(cls, obj, g):
        colors = np.zeros((g.n, g.n), dtype=np.uint8)
        seen = np.zeros((g.n, g.n), dtype=bool)
        for u, v, name in obj["colors"]:
            if seen[u, v]:
                raise ValueError(f"edge ({u},{v}) colored twice")
            seen[u, v] = True
            colors[u, v] = COLOR_BY_NAME[name]
        c = cls(colors)
        c.validate(g)
        if not np.array_equal(seen, g.adj):
            raise ValueError("coloring does not cover every edge exactly once")
        return c


@dataclass(frozen=True)
class Coloration:
    """The coloration C = (C', k): a spot whitelist plus an exact blank budget.

    `blanks` counts blank-colored edges, loops included (the non-blank count
    of an instance is derivable via `nonblank_count`).
    """

    spots: frozenset
    blanks: int

    def nonblank_count(self, g):
        return g.edge_count() - self.blanks

    def to_json_obj(self):
        return {"spots": sorted(spot_to_string(s) for s in self.spots),
                "blanks": self.blanks}

    @classmethod
    def from_json_obj(cls, obj):
        return cls(frozenset(spot_from_string(s) for s in obj["spots"]), obj["blanks"])


def spot_of_triple(c, i, j, k):
    """Canonical spot induced by the node triple (i, j, k) under coloring c."""
    m = c.colors
    return canonical_spot(
        (int(m[i, i]), int(m[j, j]), int(m[k, k])),
        (int(m[i, j]), int(m[j, i]), int(m[i, k]), int(m[k, i]), int(m[j, k]), int(m[k, j])),
    )


def _triple_vectors(c, triples):
    """(m, 9) raw slot vectors for an array of node triples."""
    t = np.asarray(triples, dtype=np.intp)
    i, j, k = t[:, 0], t[:, 1], t[:, 2]
    m = c.colors
    return np.stack(
        [m[i, i], m[j, j], m[k, k],
         m[i, j], m[j, i], m[i, k], m[k, i], m[j, k], m[k, j]],
        axis=1,
    ).astype(np.int64)


def spots_of_triples(c, triples):
    """Vectorized canonical spots for an (m, 3) array of triples."""
    if len(triples) == 0:
        return np.zeros(0, dtype=np.int64)
    return canon_spots_batch(_triple_vectors(c, triples))


def coloration_of(g, c, spots_only=False):
    """The coloration of (g, c): all canonical spots over node triples plus
    the exact blank-edge count.  Rejects graphs with fewer than 3 nodes."""
    if g.n < 3:
        raise ValueError("coloration_of needs at least 3 nodes")
    c.validate(g)
    spots = set()
    batch = []
    for trip in itertools.combinations(range(g.n), 3):
        batch.append(trip)
        if len(batch) >= 200_000:
            spots.update(spots_of_triples(c, batch).tolist())
            batch = []
    if batch:
        spots.update(spots_of_triples(c, batch).tolist())
    if spots_only:
        return frozenset(spots)
    return Coloration(frozenset(spots), c.blank_count())


def nondefault_triples(g, c):
    """All node triples touching at least one non-grey, non-absent non-loop
    edge, as a deduplicated (m, 3) array of sorted triples."""
    offdiag = c.colors.copy()
    np.fill_diagonal(offdiag, ABSENT)
    us, vs = np.nonzero((offdiag != ABSENT) & (offdiag != GREY))
    if len(us) == 0:
        return np.zeros((0, 3), dtype=np.intp)
    lo, hi = np.minimum(us, vs), np.maximum(us, vs)
    n = g.n
    pair_keys = np.unique(lo.astype(np.int64) * n + hi)
    a = np.repeat(pair_keys // n, n)
    b = np.repeat(pair_keys % n, n)
    w = np.tile(np.arange(n, dtype=np.int64), len(pair_keys))
    keep = (w != a) & (w != b)
    a, b, w = a[keep], b[keep], w[keep]
    i = np.minimum(np.minimum(a, b), w)
    k = np.maximum(np.maximum(a, b), w)
    j = a + b + w - i - k
    keys = np.unique((i * n + j) * n + k)
    out = np.empty((len(keys), 3), dtype=np.intp)
    out[:, 2] = keys % n
    keys //= n
    out[:, 1] = keys % n
    out[:, 0] = keys // n
    return out


def colored_triangle_stream(g, c, default_spots):
    """Yield (triple, spot) for every triple not guaranteed default.

    `default_spots` must be the grey/absent closure for g (see
    `default_spot_closure`); the union of yielded spots with the default
    spots occurring in (g, c) reproduces coloration_of(g, c).spots.
    Single-consumer stream.
    """
    trips = nondefault_triples(g, c)
    if len(trips) == 0:
        return
    spots = spots_of_triples(c, trips)
    for trip, spot in zip(trips, spots):
        yield (int(trip[0]), int(trip[1]), int(trip[2])), int(spot)


def default_spot_closure(g, c):
    """Canonical spots whose arcs are all grey-or-absent, over every loop
    pattern present in (g, c).  Covers every triple the stream may skip."""
    loop_colors = sorted({int(c.colors[u, u]) for u in range(g.n)})
    spots = set()
    vecs = []
    for loops in itertools.product(loop_colors, repeat=3):
        for arcs in itertools.product((ABSENT, GREY), repeat=6):
            vecs.append(list(loops) + list(arcs))
    spots.update(canon_spots_batch(np.array(vecs, dtype=np.int64)).tolist())
    return frozenset(spots)


def dump_json(obj, path):
    """Canonical JSON dump; byte-identical across repeated writes."""
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def load_json(path):
    with open(path) as f:
        return json.load(f)
