"""Witness-independent structural skeleton shared by the reduction and the
colorer.

The primary grid is the 2p x 2p torus carried by the commuting
permutations h (x+1) and v (y+1) over L_T + {t_1} + U_0, with t_1 at the
origin and a node looped iff x+y is even.  The input chain snakes through
all looped nodes row by row (H steps inside a row, one d3 diagonal per row
change), interleaving the input nodes of U_T.  Both the reduction (which
plants this structure into the random graph) and the template builder
(which paints it) enumerate the same abstract pair list from here, so the
two sides cannot drift apart.

Abstract node references: ("t", i) tournament (1-based, t_1 the sink),
("v", i) input nodes in decreasing code order (1-based), ("z", s) chain
slot s >= 1 (slot 0 is t_1), ("u0", j) grid un-looped nodes in canonical
coordinate order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass


class GridGeometry:
    """Coordinates and permutations of the 2p x 2p toroidal grid."""

    def __init__(self, p):
        self.p = p
        self.side = 2 * p
        # chain slot -> looped coordinate, boustrophedon over all 2p rows
        slots = []
        for y in range(self.side):
            x0 = (-y) % self.side
            for t in range(p):
                slots.append(((x0 + 2 * t) % self.side, y))
        self.slot_coord = slots
        self.coord_slot = {c: s for s, c in enumerate(slots)}
        self.unlooped = sorted(
            ((x, y) for x in range(self.side) for y in range(self.side)
             if (x + y) % 2 == 1),
            key=lambda c: (c[1], c[0]))
        self.unlooped_index = {c: j for j, c in enumerate(self.unlooped)}

    def h(self, c):
        return ((c[0] + 1) % self.side, c[1])

    def h_inv(self, c):
        return ((c[0] - 1) % self.side, c[1])

    def v(self, c):
        return (c[0], (c[1] + 1) % self.side)

    def d1(self, c):
        return ((c[0] + 1) % self.side, (c[1] + 1) % self.side)

    def d2(self, c):
        return ((c[0] - 1) % self.side, (c[1] + 1) % self.side)

    def H(self, c):
        return ((c[0] + 2) % self.side, c[1])

    def V(self, c):
        return (c[0], (c[1] + 2) % self.side)

    def looped(self, c):
        return (c[0] + c[1]) % 2 == 0

    def cell_coord(self, row, col):
        """Even-grid coordinate of table cell (row, col)."""
        return (2 * col, 2 * row)

    def coord_cell(self, c):
        if c[0] % 2 or c[1] % 2:
            raise ValueError("not an even-grid coordinate")
        return (c[1] // 2, c[0] // 2)

    def d3_chain_slots(self):
        """Chain slot pairs joined by a d3 diagonal (row changes)."""
        p = self.p
        return [((r + 1) * p - 1, (r + 1) * p) for r in range(2 * p - 1)]

    def border_coords(self):
        """Un-looped bottom-row and left-border coordinates, split into the
        four h/v wrap partners of t_1 and the B/L targets."""
        side = self.side
        bottom = [(x, 0) for x in range(1, side, 2)]
        left = [(0, y) for y in range(1, side, 2)]
        wraps = {(1, 0), (side - 1, 0), (0, 1), (0, side - 1)}
        b_targets = [c for c in bottom if c not in wraps]
        l_targets = [c for c in left if c not in wraps]
        return wraps, b_targets, l_targets


def zref(geom, slot):
    """Abstract reference of the looped node at a chain slot."""
    return ("t", 1) if slot == 0 else ("z", slot)


def looped_ref_of_coord(geom, coord):
    return zref(geom, geom.coord_slot[coord])


def ref_of_coord(geom, coord):
    if geom.looped(coord):
        return looped_ref_of_coord(geom, coord)
    return ("u0", geom.unlooped_index[coord])


@dataclass(frozen=True)
class SkeletonPair:
    """One planted ordered pair: fwd is a -> b, rev is b -> a."""

    a: tuple
    b: tuple
    fwd: bool
    rev: bool
    cls: str


def i_arc_classes(p):
    """Number of chain arcs that are I1 (the bottom-row prefix)."""
    return 2 * p - 2


def skeleton_pairs(p, k, s=None):
    """The full witness-independent planted pair list for parameters p, k.

    `s`, when given, is the input string over {0,1,*,A} whose symbols are
    encoded on successive input-node pairs (absent, forward, backward,
    double respectively).
    """
    geom = GridGeometry(p)
    n_slots = 2 * p * p
    pairs = []
    add = pairs.append

    # input chain: arcs z_i -> v_{i+1} (odd arc index 2i+1) and
    # v_i -> z_i (even arc index 2i); the first 2p-2 arcs are I1 (reverse
    # edge present), the rest I2 (single); the chain start at t_1 is a
    # single regardless.
    i1_cut = i_arc_classes(p)
    for i in range(n_slots):
        arc_index = 2 * i + 1
        rev = arc_index <= i1_cut and i != 0
        add(SkeletonPair(zref(geom, i), ("v", i + 1), True, rev,
                         "I1" if arc_index <= i1_cut else "I2"))
    for i in range(1, n_slots):
        arc_index = 2 * i
        add(SkeletonPair(("v", i), zref(geom, i), True, arc_index <= i1_cut,
                         "I1" if arc_index <= i1_cut else "I2"))

    # primary grid permutations
    for c in geom.slot_coord + geom.unlooped:
        add(SkeletonPair(ref_of_coord(geom, c), ref_of_coord(geom, geom.h(c)),
                         True, True, "h"))
        add(SkeletonPair(ref_of_coord(geom, c), ref_of_coord(geom, geom.v(c)),
                         True, True, "v"))
    for c in geom.unlooped:
        add(SkeletonPair(("u0", geom.unlooped_index[c]),
                         ref_of_coord(geom, geom.d1(c)), True, True, "d1"))
        add(SkeletonPair(("u0", geom.unlooped_index[c]),
                         ref_of_coord(geom, geom.d2(c)), True, False, "d2"))
        add(SkeletonPair(("u0", geom.unlooped_index[c]),
                         ref_of_coord(geom, geom.H(c)), True, False, "Hu"))
        add(SkeletonPair(("u0", geom.unlooped_index[c]),
                         ref_of_coord(geom, geom.V(c)), True, False, "Vu"))
    for c in geom.slot_coord:
        even_even = c[0] % 2 == 0 and c[1] % 2 == 0
        add(SkeletonPair(looped_ref_of_coord(geom, c),
                         looped_ref_of_coord(geom, geom.H(c)), True, True, "Hz"))
        # even-grid V pairs are symbol-carrying doubles; odd-parity V pairs
        # are single red edges
        add(SkeletonPair(looped_ref_of_coord(geom, c),
                         looped_ref_of_coord(geom, geom.V(c)), True, even_even, "Vz"))
    for s_a, s_b in geom.d3_chain_slots():
        add(SkeletonPair(zref(geom, s_a), zref(geom, s_b), True, True, "d3"))

    # position links: h(z_i) paired with v_{i+1}
    for i in range(n_slots - 1):
        u = geom.h(geom.slot_coord[i])
        add(SkeletonPair(("u0", geom.unlooped_index[u]), ("v", i + 1),
                         True, True, "position"))

    # anchor pairs to t_2 and t_3 from every chain slot except t_1 itself
    for i in range(1, n_slots):
        add(SkeletonPair(("z", i), ("t", 2), True, False, "anchor2"))
        add(SkeletonPair(("z", i), ("t", 3), True, False, "anchor3"))

    # borders: t_1 doubly connected to the bottom row and left border
    wraps, b_targets, l_targets = geom.border_coords()
    for c in b_targets:
        add(SkeletonPair(("t", 1), ("u0", geom.unlooped_index[c]), True, True, "B"))
    for c in l_targets:
        add(SkeletonPair(("t", 1), ("u0", geom.unlooped_index[c]), True, True, "L"))

    # input string encoding on successive input nodes
    if s is not None:
        if len(s) > n_slots - 1:
            raise ValueError("input string too long for the input chain")
        conn = {"0": (False, False), "1": (True, False),
                "*": (False, True), "A": (True, True)}
        for i, sym in enumerate(s, start=1):
            if sym not in conn:
                raise ValueError(f"input symbols must be 0, 1, *, A (got {sym!r})")
            fwd, rev = conn[sym]
            add(SkeletonPair(("v", i), ("v", i + 1), fwd, rev, "s"))

    return geom, pairs


def template_node_ids(p, k):
    """Node numbering of the template graph G': tournament first, then
    input nodes, chain slots, grid un-looped nodes."""
    n_slots = 2 * p * p
    ids = {}
    for i in range(1, k + 1):
        ids[("t", i)] = i - 1
    for i in range(1, n_slots + 1):
        ids[("v", i)] = k + i - 1
    for i in range(1, n_slots):
        ids[("z", i)] = k + n_slots + i - 1
    for j in range(n_slots):
        ids[("u0", j)] = k + 2 * n_slots - 1 + j
    return ids


def tournament_arcs(k):
    """Ordered tournament pairs: t_j -> t_i present iff j > i (t_1 sink)."""
    return [(("t", j), ("t", i)) for j in range(1, k + 1) for i in range(1, k + 1)
            if j > i]
