"""The adversary-facing side: check a proposed coloring against a
coloration, audit the blank types against the per-type budgets, and read
the tiling witness back out of an accepted coloring.

Everything here is layout-free: the tournament is recovered from the
blank loops, the adjacency classes from the graph, and the grid from the
blank-pattern links, exactly as the scarcity argument intends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphcore import (ABSENT, BLANK, GREEN, GREY, RED, default_spot_closure,
                        nondefault_triples, spots_of_triples)
from .tiling import TilingSquare

BLANK_TYPE_NAMES = ("T", "h", "v", "d1", "d2", "K", "I", "M", "C")


@dataclass
class Verdict:
    accepted: bool
    reason: str = ""          # "", "spot", "budget"
    detail: object = None

    def __bool__(self):
        return self.accepted


@dataclass
class BlankAudit:
    counts: tuple            # (b0 .. b8)
    unclassifiable: list     # [(u, v), ...]


class AdjClasses:
    """Adjacency classes reconstructed from a colored graph: the blank-loop
    tournament and the node sets it induces."""

    def __init__(self, g, c):
        adj = g.adj
        colors = c.colors
        n = g.n
        loops = np.diag(adj)
        self.t_set = np.flatnonzero(np.diag(colors) == BLANK)
        self.is_t = np.zeros(n, dtype=bool)
        self.is_t[self.t_set] = True
        ts = self.t_set
        if len(ts):
            adj_any = adj[:, ts] | adj[ts, :].T
            conn_all = adj_any.all(axis=1)
            down_single = (adj[:, ts] & ~adj[ts, :].T).any(axis=1)
        else:
            conn_all = np.zeros(n, dtype=bool)
            down_single = np.zeros(n, dtype=bool)
        self.looped = loops
        self.u_t = ~loops & conn_all & ~self.is_t
        self.l_t = loops & conn_all & ~self.is_t
        self.u_0 = ~loops & ~down_single & ~self.is_t & ~self.u_t
        # the tournament sink: no single out-edge within the blank-loop set
        self.t1 = None
        if len(ts):
            sub_out = adj[np.ix_(ts, ts)] & ~adj[np.ix_(ts, ts)].T
            outdeg = sub_out.sum(axis=1)
            sinks = np.flatnonzero(outdeg == 0)
            if len(sinks) == 1:
                self.t1 = int(ts[sinks[0]])


def verify_coloring(g, c, col, exhaustive=False):
    """Accept iff the blank count meets the budget exactly and every
    triple's canonical spot is whitelisted.

    The spot side checks only the triples touching a non-default edge
    after a one-time check that the grey/absent default closure is
    whitelisted; third nodes are grouped by their color signature against
    each non-default pair, since the spot depends only on that signature.
    --exhaustive forces the full triple enumeration instead."""
    c.validate(g)
    blanks = c.blank_count()
    if blanks != col.blanks:
        return Verdict(False, "budget", {"blanks": blanks, "budget": col.blanks})
    allowed = col.spots
    closure = default_spot_closure(g, c)
    if closure - allowed:
        # a loop combination of the closure is not whitelisted; the stream
        # shortcut is unsound then, so scan everything
        exhaustive = True
    if exhaustive:
        import itertools
        allowed_arr = np.fromiter(allowed, dtype=np.int64)
        batch = []
        for trip in itertools.combinations(range(g.n), 3):
            batch.append(trip)
            if len(batch) >= 200_000:
                v = _check_batch(c, batch, allowed_arr)
                if v is not None:
                    return v
                batch = []
        if batch:
            v = _check_batch(c, batch, allowed_arr)
            if v is not None:
                return v
        return Verdict(True)
    return _verify_stream_grouped(g, c, allowed)


def _check_batch(c, trips, allowed_arr):
    spots = spots_of_triples(c, trips)
    bad = ~np.isin(spots, allowed_arr)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        t = trips[i] if not isinstance(trips, list) else trips[i]
        return Verdict(False, "spot",
                       {"triple": tuple(int(x) for x in t), "spot": int(spots[i])})
    return None


def _verify_stream_grouped(g, c, allowed, chunk=512):
    """Check every triple touching a non-default pair, deduplicating third
    nodes by signature."""
    from .graphcore import canon_spots_batch
    colors = c.colors
    n = g.n
    offdiag = colors.copy()
    np.fill_diagonal(offdiag, ABSENT)
    us, vs = np.nonzero((offdiag != ABSENT) & (offdiag != GREY))
    if len(us) == 0:
        return Verdict(True)
    lo, hi = np.minimum(us, vs), np.maximum(us, vs)
    pair_keys = np.unique(lo.astype(np.int64) * n + hi)
    a_all = (pair_keys // n).astype(np.intp)
    b_all = (pair_keys % n).astype(np.intp)
    diag = np.diag(colors).astype(np.int64)
    allowed_arr = np.unique(np.fromiter(allowed, dtype=np.int64))
    w_idx = np.arange(n)
    for start in range(0, len(a_all), chunk):
        a = a_all[start:start + chunk]
        b = b_all[start:start + chunk]
        m = len(a)
        sig = diag[None, :].repeat(m, axis=0)
        sig = sig * 5 + colors[a, :]
        sig = sig * 5 + colors[:, a].T
        sig = sig * 5 + colors[b, :]
        sig = sig * 5 + colors[:, b].T
        sig[w_idx[None, :] == a[:, None]] = -1
        sig[w_idx[None, :] == b[:, None]] = -1
        combo = np.where(sig < 0, np.int64(-1),
                         sig + np.arange(m, dtype=np.int64)[:, None] * 5**5)
        uniq = np.unique(combo)
        uniq = uniq[uniq >= 0]
        pidx = uniq // 5**5
        s = uniq % 5**5
        c_wb = s % 5
        s //= 5
        c_bw = s % 5
        s //= 5
        c_wa = s % 5
        s //= 5
        c_aw = s % 5
        l_w = s // 5
        aa, bb = a[pidx], b[pidx]
        vecs = np.stack([
            diag[aa], diag[bb], l_w,
            colors[aa, bb], colors[bb, aa],
            c_aw, c_wa, c_bw, c_wb,
        ], axis=1).astype(np.int64)
        spots = canon_spots_batch(vecs)
        bad = ~np.isin(spots, allowed_arr)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            # reconstruct one offending third node
            ai, bi = int(aa[i]), int(bb[i])
            row = int(pidx[i])
            target = int(uniq[i] % 5**5)
            ws = np.flatnonzero(sig[row] == target)
            return Verdict(False, "spot",
                           {"triple": (ai, bi, int(ws[0])), "spot": int(spots[i])})
    return Verdict(True)


def audit_blanks(g, c):
    """Classify every blank edge into the type vector (b0..b8) using only
    local context: the endpoints' loop/blank statuses and their adjacency
    to the blank-loop tournament."""
    cls = AdjClasses(g, c)
    adj, colors = g.adj, c.colors
    counts = [0] * 9
    unclass = []
    us, vs = np.nonzero(colors == BLANK)
    for a, b in zip(us.tolist(), vs.tolist()):
        kind = _classify_blank(cls, adj, colors, a, b)
        if kind is None:
            unclass.append((a, b))
        else:
            counts[kind] += 1
    return BlankAudit(tuple(counts), unclass)


def _classify_blank(cls, adj, colors, a, b):
    B = BLANK_TYPE_NAMES.index
    if a == b:
        return B("T") if cls.is_t[a] else None
    ta, tb = cls.is_t[a], cls.is_t[b]
    if ta and tb:
        return None  # tournament arcs are green in any accepted coloring
    if ta or tb:
        t, u = (a, b) if ta else (b, a)
        if cls.looped[u]:
            return B("M") if cls.l_t[u] else None
        double = adj[u, t] and adj[t, u]
        if not double:
            if cls.u_t[u]:
                return B("I") if t == cls.t1 else B("K")
            return None
        both_blank = colors[u, t] == BLANK and colors[t, u] == BLANK
        if cls.u_t[u]:
            if both_blank:
                # combined key+code link: the down edge counts as K, the
                # other as C
                return B("K") if (a, b) == (u, t) else B("C")
            return B("C")
        if cls.u_0[u] and t == cls.t1:
            if both_blank:
                return B("v")
            other = colors[t, u] if (a, b) == (u, t) else colors[u, t]
            if other == GREY:
                return B("h")
            if other in (GREEN, RED):
                return B("C")
            return None
        if both_blank:
            return None
        return B("C") if (cls.u_0[u] or not cls.looped[u]) else None
    la, lb = cls.looped[a], cls.looped[b]
    if la and lb:
        return B("M") if cls.l_t[a] and cls.l_t[b] else None
    if la != lb:
        z, u = (a, b) if la else (b, a)
        if not cls.l_t[z]:
            return None
        if cls.u_t[u]:
            return B("I")
        if cls.u_0[u]:
            both_blank = adj[a, b] and adj[b, a] and \
                colors[a, b] == BLANK and colors[b, a] == BLANK
            return B("v") if both_blank else B("h")
        return None
    # both un-looped
    if cls.u_0[a] and cls.u_0[b]:
        double = adj[a, b] and adj[b, a]
        return B("d1") if double else B("d2")
    return None


# ---------------------------------------------------------------------------
# extraction

class ExtractionError(RuntimeError):
    """Structural failure while reading the tiling back; carries the
    failing stage."""


def _unique(candidates, stage):
    if len(candidates) != 1:
        raise ExtractionError(f"{stage}: expected a unique node, got {len(candidates)}")
    return candidates[0]


def extract_tiling(g, c, params, palette):
    """Read the tiling square off an accepted coloring: identify the
    tournament and its sink, walk the chain, rebuild the grid
    permutations and coordinates, and decode the cell symbols."""
    cls = AdjClasses(g, c)
    adj, colors = g.adj, c.colors
    p = params.p
    if len(cls.t_set) != params.k:
        raise ExtractionError(f"tournament: {len(cls.t_set)} blank loops, wanted {params.k}")
    if cls.t1 is None:
        raise ExtractionError("tournament: no unique sink")
    t1 = cls.t1

    # chain start: the unique single blank down edge into an un-looped node
    n = g.n
    cand = [u for u in range(n)
            if not cls.looped[u] and colors[t1, u] == BLANK and not adj[u, t1]]
    v1 = _unique(cand, "chain start")

    # the chain alternates: from an input node the only non-tournament
    # blank out-edge is its link to the next looped node; from a looped
    # node the link's reverse is green (bottom row) or absent, which
    # separates it from the grid blanks (reverse grey or blank)
    n_slots = 2 * p * p
    vs = [v1]
    zs = [t1]
    for step in range(n_slots - 1):
        v = vs[-1]
        zc = [w for w in np.flatnonzero(colors[v] == BLANK)
              if cls.looped[w] and not cls.is_t[w]]
        z = _unique(zc, f"chain z after v_{len(vs)}")
        zs.append(z)
        vc = [w for w in np.flatnonzero(colors[z] == BLANK)
              if not cls.looped[w] and not cls.is_t[w]
              and int(colors[w, z]) in (GREEN, ABSENT)]
        v_next = _unique(vc, f"chain v after z_{len(zs) - 1}")
        vs.append(v_next)
    if len(set(zs)) != n_slots or len(set(vs)) != n_slots:
        raise ExtractionError("chain: revisited a node")

    # grid permutations from the blank-pattern directed links; the v
    # permutation has symmetric (double blank) colors, so it is recovered
    # as h^-1 after the d1 diagonal (forward blank, reverse red)
    grid_looped = set(zs)

    def grid_node(w):
        return (cls.u_0[w] or w in grid_looped) and not cls.u_t[w]

    def h_of(x):
        cand = [w for w in np.flatnonzero(colors[x] == BLANK)
                if w != x and grid_node(w) and colors[w, x] == GREY]
        return _unique(cand, f"h at {x}")

    def h_inv_of(x):
        cand = [w for w in np.flatnonzero(colors[:, x] == BLANK)
                if w != x and grid_node(w) and colors[x, w] == GREY]
        return _unique(cand, f"h^-1 at {x}")

    def d1_of(x):
        cand = [w for w in np.flatnonzero(colors[x] == BLANK)
                if w != x and grid_node(w) and colors[w, x] == RED
                and not cls.looped[w]]
        return _unique(cand, f"d1 at {x}")

    def v_of(x):
        if cls.looped[x]:
            return h_inv_of(h_inv_of(d1_of(h_of(x))))
        return h_inv_of(d1_of(x))

    side = 2 * p
    coord = {t1: (0, 0)}
    frontier = [t1]
    while frontier:
        x = frontier.pop()
        cx, cy = coord[x]
        for nxt, cc in ((h_of(x), ((cx + 1) % side, cy)),
                        (v_of(x), (cx, (cy + 1) % side))):
            if nxt in coord:
                if coord[nxt] != cc:
                    raise ExtractionError("grid: inconsistent coordinates")
            else:
                coord[nxt] = cc
                frontier.append(nxt)
    if len(coord) != 4 * p * p:
        raise ExtractionError(f"grid: covered {len(coord)} nodes, wanted {4 * p * p}")
    node_at = {cc: x for x, cc in coord.items()}

    # decode cells: symbol from the H/V color pairs, head and side flags
    # from the loop colors
    table = []
    for r in range(p):
        heads = [col for col in range(p)
                 if colors[node_at[(2 * col, 2 * r)], node_at[(2 * col, 2 * r)]] == RED]
        if len(heads) > 1:
            raise ExtractionError(f"row {r}: multiple head cells")
        head = heads[0] if heads else None
        row = []
        for col in range(p):
            z = node_at[(2 * col, 2 * r)]
            hz = node_at[((2 * col + 2) % side, 2 * r)]
            vz = node_at[(2 * col, (2 * r + 2) % side)]
            value = palette.symbol_from_colors(
                (int(colors[z, hz]), int(colors[hz, z])),
                (int(colors[z, vz]), int(colors[vz, z])))
            if col == head:
                if not value.startswith("@"):
                    raise ExtractionError(f"cell ({r},{col}): red node without a head value")
                row.append(value)
            elif value == "%":
                row.append("%")
            else:
                if head is None:
                    raise ExtractionError(f"row {r}: sided cell without a head")
                row.append(value + ("<" if col < head else ">"))
        table.append(tuple(row))
    return TilingSquare(tuple(table))
